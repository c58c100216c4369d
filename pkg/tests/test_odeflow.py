from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbijump.errors import UnsortedTimes
from cbijump.measures import Atom, JumpSet
from cbijump.mechanisms import phi
from cbijump.odeflow import (
    DEFAULT_CONFIG,
    SolverConfig,
    flow_v,
    flow_v_joint,
    flow_v_marked,
    flow_v_set,
    g_piecewise,
    integrate,
    w_chain,
    y_chain,
)

from conftest import iv, single


def test_zero_initial_condition_is_fixed(rich):
    sol = flow_v(rich, 0.0, 3.0)
    assert sol.final[0] == 0.0 and sol.final_psi == 0.0


def test_linear_closed_form():
    sol = flow_v(single(B=-0.5), 2.0, 1.0)
    assert sol.value(1.0) == pytest.approx(2 * math.exp(-0.5), rel=1e-8)


def test_riccati_closed_form(feller):
    sol = flow_v(feller, 1.0, 1.0)
    assert sol.value(1.0) == pytest.approx(0.5, rel=1e-8)
    ts = np.linspace(0, 1, 37)
    assert np.allclose([sol.value(t) for t in ts], 1 / (1 + ts), rtol=1e-7, atol=0)


def test_initial_condition_exact(rich):
    sol = flow_v(rich, 0.731, 2.0)
    assert sol.value(0.0) == 0.731
    assert flow_v(rich, 0.731, 0.0).final[0] == 0.731


def test_joint_flow_examples(decay_atom, rich):
    A = [iv(0.5, 1.5)]
    sol = flow_v_joint(decay_atom, A, 0.0, [50.0], 1.0)
    assert sol.value(1.0) == pytest.approx(1 - math.exp(-1), abs=1e-6)
    assert flow_v_joint(rich, A, 0.4, [0.0], 2.0).value(2.0) == pytest.approx(
        flow_v(rich, 0.4, 2.0).value(2.0), rel=1e-10
    )
    assert flow_v_joint(rich, A, 0.4, [3.0], 0.0).value(0.0) == 0.4


def test_marked_flow_examples(decay_atom):
    A = iv(0.5, 1.5)
    assert flow_v_marked(single(c=0.5, B=0.3), A, 2.0).final[0] == 0.0
    assert flow_v_marked(decay_atom, A, 1.0).final[0] == pytest.approx(1 - math.exp(-1), rel=1e-8)
    frozen = single(B=1.0, mu=[Atom(1.0, 1.0)])
    sol = flow_v_marked(frozen, A, 1.0)
    assert sol.final[0] == pytest.approx(1.0, rel=1e-10)


def test_set_flow_examples(decay_atom, rich):
    A = iv(0.5, 1.5)
    assert flow_v_set(rich, A, 0.0, 1.5).value(1.5) == pytest.approx(flow_v_marked(rich, A, 1.5).final[0], rel=1e-12)
    assert flow_v_set(rich, JumpSet.empty(), 0.6, 1.5).value(1.5) == pytest.approx(flow_v(rich, 0.6, 1.5).value(1.5), rel=1e-12)
    lam0 = 1 - math.exp(-0.5)
    assert flow_v_set(decay_atom, A, lam0, 0.5).value(0.5) == pytest.approx(1 - math.exp(-1), rel=1e-8)


def test_w_chain_examples(decay_atom, rich):
    A = iv(0.5, 1.5)
    ch = w_chain(decay_atom, [A, A], [0.5, 1.0])
    assert ch.w(1, 0.5) == pytest.approx(1 - math.exp(-1), rel=1e-8)
    assert ch.w(2, 0.5) == pytest.approx(1 - math.exp(-0.5), rel=1e-8)
    one = w_chain(rich, [A], [1.2])
    assert one.w(1, 1.2) == pytest.approx(flow_v_marked(rich, A, 1.2).final[0], rel=1e-12)
    sets = [A, iv(2, 3), iv(0.1, 0.3)]
    eq = w_chain(rich, sets, [0.9] * 3)
    union = sets[0] | sets[1] | sets[2]
    assert eq.w(1, 0.9) == pytest.approx(flow_v_marked(rich, union, 0.9).final[0], abs=1e-9)
    with pytest.raises(UnsortedTimes):
        w_chain(rich, [A, A], [1.0, 0.5])


def test_y_chain_examples(feller, rich):
    ch = y_chain(feller, [1.0, 2.0], [1.0, 1.0])
    assert ch.ys[1][0] == 1.0
    assert ch.ys[0][0] == pytest.approx(1.5, rel=1e-8)
    assert y_chain(rich, [0.7], [0.4]).ys[0][0] == 0.4
    eq = y_chain(rich, [0.7, 0.7], [0.4, 0.25])
    assert eq.ys[0][0] == 0.65
    with pytest.raises(UnsortedTimes):
        y_chain(rich, [1.0, 0.5], [1, 1])


CB = single(c=0.4, B=-0.3, mu=[Atom(0.8, 0.6), Atom(2.0, 0.3)])


def test_g_function_examples():
    g1 = g_piecewise(CB, [1.5], [0.8])
    for s in (0.0, 0.4, 1.1):
        assert g1(s) == pytest.approx(flow_v(CB, 0.8, 1.5 - s).value(1.5 - s), rel=1e-7)
    g = g_piecewise(CB, [0.5, 1.0, 2.0], [0.3, 0.7, 1.1])
    assert g(2.0) == 1.1
    for ti, li in zip([0.5, 1.0], [0.3, 0.7]):
        assert g(ti) - g.right_limit(ti) == pytest.approx(li, abs=1e-8)
    assert g.residual(np.linspace(0, 2, 201)).max() <= 1e-7
    with pytest.raises(UnsortedTimes):
        g_piecewise(CB, [0.0, 1.0], [1, 1])


def test_guard_rejects_negative_steps():
    # v' = -5 has its root at v=0 and keeps pushing below it
    def f(y):
        return np.array([-5.0 if y[0] > 0 else 0.0, 0.0])

    sol = integrate(f, [1.0, 0.0], 1.0, DEFAULT_CONFIG, nonneg=1, dim=1)
    assert sol.value(0.2) == pytest.approx(0.0, abs=1e-10)
    assert np.all(sol.y_nodes[:, 0] >= 0)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

family = st.builds(
    lambda c, B, w1, w2, beta: single(c=c, beta=beta, B=B, mu=[Atom(0.5, w1), Atom(2.0, w2)], nu=[Atom(1.0, 0.5)]),
    st.floats(0, 1),
    st.floats(-1, 1),
    st.floats(0, 1.5),
    st.floats(0, 1.5),
    st.floats(0, 1),
)


@given(family, st.floats(0, 2), st.floats(0, 2), st.floats(0, 4))
def test_flow_property(p, t, s, lam):
    direct = flow_v(p, lam, t + s).value(t + s)
    mid = flow_v(p, lam, s).value(s)
    assert abs(direct - flow_v(p, mid, t).value(t)) <= 1e-7


@given(family, st.floats(0, 4), st.floats(0, 2))
def test_monotone_in_initial_condition_and_nonnegative(p, lam, dl):
    a = flow_v(p, lam, 2.0)
    b = flow_v(p, lam + dl, 2.0)
    ts = np.linspace(0, 2, 21)
    va = np.array([a.value(t) for t in ts])
    vb = np.array([b.value(t) for t in ts])
    assert np.all(va >= -DEFAULT_CONFIG.abs_tol)
    assert np.all(vb - va >= -1e-8)
    psis = np.array([a.psi_integral(t) for t in ts])
    assert np.all(np.diff(psis) >= -1e-12)


@given(family, st.floats(0, 2), st.floats(0, 5), st.floats(0.1, 3))
def test_joint_flow_monotone_and_saturated(p, lam0, lam, dlam):
    sets = [iv(0.3, 0.7), iv(1.5, 2.5)]
    t = 1.3
    lo = flow_v_joint(p, sets, lam0, [lam, 0.5 * lam], t).value(t)
    hi = flow_v_joint(p, sets, lam0, [lam + dlam, 0.5 * (lam + dlam)], t).value(t)
    assert hi >= lo - 1e-8
    cap = flow_v_set(p, sets[0] | sets[1], lam0, t).value(t)
    assert hi <= cap + 1e-8


def test_solution_csv(tmp_path, rich):
    sol = flow_v(rich, 0.5, 1.0)
    out = tmp_path / "flow.csv"
    sol.to_csv(out, np.linspace(0, 1, 5))
    lines = out.read_text().splitlines()
    assert lines[0] == "t,v_1,psi_integral" and len(lines) == 6
