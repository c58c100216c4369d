from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cbijump.errors import PreconditionViolated
from cbijump.measures import Atom, ExpDensity, JumpSet, TemperedPowerLaw
from cbijump.params import effective_linear
from cbijump.simkit import (
    Jump,
    LaplaceQuery,
    PathRecord,
    SurvivalQuery,
    euler_bias_budget,
    euler_terminal_states,
    exact_paths,
    jump_statistics,
    mc_estimate,
    path_rng,
    simulate_euler,
    simulate_exact_jump,
)
from cbijump.laws import laplace_state_and_counts, survival_joint

from conftest import iv, single

A1, A2 = iv(0.5, 1.5), iv(1.5, 2.5)


def _record(jumps, T=1.0):
    return PathRecord(np.array([0.0, T]), np.array([1.0, 1.0]), np.array([1.0, 1.0]), tuple(jumps), T, "exact")


def test_pure_drift_path():
    path = simulate_exact_jump(single(beta=1.0), 0.0, 2.0, path_rng(1, 0))
    assert path.jumps == ()
    assert path.final_state == pytest.approx(2.0, abs=1e-15)


def test_exact_preconditions():
    with pytest.raises(PreconditionViolated):
        simulate_exact_jump(single(c=1.0), 1.0, 1.0, path_rng(1, 0))
    with pytest.raises(PreconditionViolated):
        simulate_exact_jump(single(mu=[TemperedPowerLaw(0.5, 1.0, 1.0)]), 1.0, 1.0, path_rng(1, 0))
    with pytest.raises(PreconditionViolated):
        simulate_euler(single(c=1.0), 1.0, 1.0, 0.0, 0.0, path_rng(1, 0))
    with pytest.raises(PreconditionViolated):
        simulate_euler(single(mu=[TemperedPowerLaw(0.5, 1.0, 1.0)]), 1.0, 1.0, 1e-2, 0.0, path_rng(1, 0))


def test_decaying_intensity_jump_counts(decay_atom):
    n = 100_000
    counts = np.array([len(path.jumps) for path in exact_paths(decay_atom, 1.0, 1.0, 3, n)])
    # every branching jump raises the intensity, so E[J_1] = int_0^1 E[X_u] du = x e^{B~ t} = 1
    mean_band = 3 * counts.std(ddof=1) / math.sqrt(n)
    assert abs(counts.mean() - 1.0) <= mean_band
    # before the first jump the intensity is x e^{-u}: P(J_1 >= 1) = 1 - exp(-(1 - e^{-1}))
    hit = (counts > 0).astype(float)
    p_hit = 1 - math.exp(-(1 - math.exp(-1)))
    assert abs(hit.mean() - p_hit) <= 3 * hit.std(ddof=1) / math.sqrt(n)


@pytest.mark.slow
def test_poisson_immigration_count():
    p = single(nu=[Atom(2.0, 0.5)])
    n = 1_000_000
    total = sum(len(path.jumps) for path in exact_paths(p, 0.0, 2.0, 4, n))
    assert abs(total / n - 1.0) <= 0.01


def test_exact_path_invariants(rng):
    p = single(beta=0.3, B=0.2, mu=[Atom(1.0, 0.8), ExpDensity(2.0, 0.5)], nu=[Atom(0.5, 0.7)])
    for i in range(200):
        path = simulate_exact_jump(p, 1.0, 2.0, path_rng(5, i))
        assert np.all(path.states >= 0) and np.all(path.left_states >= 0)
        ts = [j.time for j in path.jumps]
        assert ts == sorted(ts)
        jumps_idx = np.arange(1, len(path.jumps) + 1)
        assert np.allclose(path.states[jumps_idx] - path.left_states[jumps_idx], [j.size for j in path.jumps], rtol=0, atol=1e-12)


def test_frozen_lattice_first_jump_is_exponential(two_atom):
    n = 100_000
    rate = 1.5  # x * mu(U_1)
    U = JumpSet.of((0, math.inf))
    tau = np.array([path.jumps[0].time for path in exact_paths(two_atom, 1.0, 50.0, 6, n, stop_on=U)])
    assert stats.kstest(tau, "expon", args=(0, 1 / rate)).pvalue > 0.001


def test_euler_without_noise_follows_affine_flow():
    p = single(beta=0.5, B=-0.7)
    path = simulate_euler(p, 2.0, 1.0, 1e-3, 0.0, path_rng(7, 0))
    exact = 2.0 * math.exp(-0.7) + 0.5 * (1 - math.exp(-0.7)) / 0.7
    assert abs(path.final_state - exact) < 1e-3
    assert path.jumps == ()


def test_feller_martingale(feller):
    x = euler_terminal_states(feller, 1.0, 1.0, 1e-3, 0.0, path_rng(8, 0), 100_000)
    assert abs(x.mean() - 1.0) <= 3 * x.std(ddof=1) / math.sqrt(x.size)
    assert np.all(x >= 0)


def test_tempered_branching_first_moment():
    p = single(mu=[TemperedPowerLaw(0.5, 1.0, 0.2)])
    eps = 1e-3
    x = euler_terminal_states(p, 1.0, 1.0, 1e-3, eps, path_rng(9, 0), 100_000)
    want = math.exp(effective_linear(p).B_tilde[0, 0])
    band = 3 * x.std(ddof=1) / math.sqrt(x.size) + euler_bias_budget(p, 1.0, 1.0, eps) / math.sqrt(x.size)
    assert abs(x.mean() - want) <= band + 1e-3  # O(dt) discretization


def test_jump_statistics_examples():
    empty = jump_statistics(_record([]), [A1, A2])
    assert empty.count(0) == 0 and empty.censored == (True, True)
    stats_ = jump_statistics(
        _record([Jump(0.3, 1.0, "branching"), Jump(0.7, 2.0, "immigration")]), [iv(1.5, 3)]
    )
    assert stats_.count(0, 1.0) == 1 and stats_.first_times == (0.7,)


@given(st.integers(0, 10_000), st.floats(0.0, 3.0), st.floats(0.05, 2.0), st.floats(0.05, 2.0))
def test_census_consistency(i, a, w1, w2):
    p = single(B=0.3, mu=[Atom(0.7, 0.9), ExpDensity(1.0, 0.6)], nu=[Atom(2.0, 0.4)])
    path = simulate_exact_jump(p, 1.0, 1.5, path_rng(10, i))
    inner, outer = iv(a, a + w1), iv(a, a + w1 + w2)
    st_ = jump_statistics(path, [inner, outer])
    incremental = 0
    for j in path.jumps:
        if inner.contains(j.size):
            incremental += 1
    assert st_.count(0) == incremental
    assert st_.first_times[1] <= st_.first_times[0]


def test_mc_survival_matches_formula(decay_atom):
    est = mc_estimate("joint_survival", decay_atom, 1.0, SurvivalQuery(((A1, 1.0),)), 100_000, 11)
    assert abs(est.mean - math.exp(-(1 - math.exp(-1)))) <= est.half_width
    assert est.level == pytest.approx(0.9973, abs=1e-4)


def test_mc_laplace_matches_formula():
    p = single(beta=0.2, B=-0.3, mu=[Atom(1.0, 0.8)], nu=[Atom(0.5, 0.6)])
    q = LaplaceQuery(1.0, 0.4, (A1,), (1.5,))
    est = mc_estimate("laplace", p, 1.0, q, 50_000, 12)
    want = laplace_state_and_counts(p, 1.0, 1.0, 0.4, [A1], [1.5]).value
    assert abs(est.mean - want) <= est.half_width


def test_deterministic_query_is_exact(decay_atom):
    est = mc_estimate("joint_survival", decay_atom, 1.0, SurvivalQuery(((iv(2, 3), 1.0),)), 1000, 13)
    assert est.mean == 1.0 and est.half_width == 0.0


@pytest.mark.parametrize("scheme", ["exact", "euler"])
def test_worker_count_does_not_change_estimates(two_atom, scheme):
    q = SurvivalQuery(((A1, 0.5), (A2, 1.0)))
    kw = dict(scheme=scheme, dt=1e-2) if scheme == "euler" else {}
    n = 9000
    runs = [mc_estimate("joint_survival", two_atom, 1.0, q, n, 14, workers=w, **kw) for w in (1, 3)]
    assert runs[0] == runs[1]


def test_euler_and_exact_agree(two_atom):
    q = SurvivalQuery(((A1, 0.5), (A2, 1.0)))
    ex = mc_estimate("joint_survival", two_atom, 1.0, q, 40_000, 15)
    eu = mc_estimate("joint_survival", two_atom, 1.0, q, 40_000, 15, scheme="euler", dt=1e-3)
    assert abs(ex.mean - eu.mean) <= math.hypot(ex.half_width, eu.half_width) * math.sqrt(2) + 1e-12
    truth = survival_joint(two_atom, 1.0, [(A1, 0.5), (A2, 1.0)]).value
    assert abs(ex.mean - truth) <= ex.half_width


def test_bad_arguments(decay_atom):
    q = SurvivalQuery(((A1, 1.0),))
    with pytest.raises(ValueError):
        mc_estimate("joint_survival", decay_atom, 1.0, q, 10, 0)
    with pytest.raises(TypeError):
        mc_estimate("laplace", decay_atom, 1.0, q, 1000, 0)


def test_path_csv(tmp_path, decay_atom):
    path = simulate_exact_jump(decay_atom, 1.0, 2.0, path_rng(16, 3))
    path.to_csv(tmp_path / "p.csv", tmp_path / "j.csv")
    assert (tmp_path / "p.csv").read_text().startswith("t,X_t\n")
    assert (tmp_path / "j.csv").read_text().startswith("u,z,origin\n")
