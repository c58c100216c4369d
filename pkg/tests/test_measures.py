from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import stats

from cbijump.errors import DivergentIntegral, ZeroMass
from cbijump.measures import (
    FULL,
    KERNELS,
    LAMBDA_KERNELS,
    Atom,
    ExpDensity,
    JumpSet,
    LevyMeasure,
    TemperedPowerLaw,
    combine_sets,
    component_from_record,
    kernel_value,
    restrict,
    sample,
)

from conftest import iv

# ---------------------------------------------------------------------------
# set algebra
# ---------------------------------------------------------------------------


def test_union_merges_adjacent():
    assert combine_sets("union", iv(0, 1), iv(1, 2)) == iv(0, 2)


def test_complement_within_positive_half_line():
    assert combine_sets("complement", iv(0.5, 1.5)) == JumpSet.of((0, 0.5), (1.5, math.inf))


def test_intersection_of_overlapping_intervals():
    assert combine_sets("intersect", iv(0, 2), iv(1, 3)) == iv(1, 2)


def test_half_open_membership():
    A = iv(1, 2)
    assert not A.contains(1.0) and A.contains(2.0) and A.contains(1.5)
    assert not JumpSet.empty().contains(1.0)


@pytest.mark.parametrize("bad", [((2, 1),), ((1, 1),), ((-1, 1),)])
def test_malformed_intervals_rejected(bad):
    with pytest.raises(ValueError):
        JumpSet(bad)


def test_inf_string_upper_end():
    assert JumpSet(((1, "inf"),)) == JumpSet.of((1, math.inf))


def _sets():
    pts = st.lists(st.integers(0, 40), min_size=0, max_size=8, unique=True).map(sorted)

    def build(ps):
        pairs = [(ps[i] / 8, ps[i + 1] / 8) for i in range(0, len(ps) - 1, 2)]
        return JumpSet(tuple(pairs))

    return pts.map(build)


zs = st.one_of(st.integers(1, 48).map(lambda k: k / 8), st.floats(1e-6, 10))


@given(_sets(), _sets(), zs)
def test_boolean_algebra_on_indicators(a, b, z):
    assert (a | b).contains(z) == (a.contains(z) or b.contains(z))
    assert (a & b).contains(z) == (a.contains(z) and b.contains(z))
    assert (~a).contains(z) == (not a.contains(z))
    assert (a - b).contains(z) == (a.contains(z) and not b.contains(z))


@given(_sets())
def test_normal_form_sorted_disjoint(a):
    ivs = a.intervals
    assert all(lo < hi for lo, hi in ivs)
    assert all(ivs[i][1] < ivs[i + 1][0] for i in range(len(ivs) - 1))


# ---------------------------------------------------------------------------
# integrals
# ---------------------------------------------------------------------------


def test_atom_mass_in_set():
    assert LevyMeasure((Atom(2.0, 0.5),)).mass(iv(1, 3)) == 0.5


def test_exp_total_mass_and_laplace_kernel():
    m = LevyMeasure((ExpDensity(1.0, 1.0),))
    assert m.mass() == pytest.approx(1.0, abs=1e-15)
    assert m.integrate("one_minus_exp", FULL, 1.0) == pytest.approx(0.5, abs=1e-14)


def test_tempered_power_law_mass_diverges_near_zero():
    m = LevyMeasure((TemperedPowerLaw(0.5, 1.0, 1.0),))
    with pytest.raises(DivergentIntegral):
        m.integrate("one", iv(0, 1))
    assert m.mass(iv(0, 1)) == math.inf
    assert math.isfinite(m.mass(iv(0.1, math.inf)))


COMPONENTS = [
    Atom(0.7, 1.3),
    Atom(1.0, 0.4),
    ExpDensity(1.7, 0.9),
    ExpDensity(0.4, 2.0),
    TemperedPowerLaw(0.5, 1.0, 0.2),
    TemperedPowerLaw(0.3, 2.5, 1.0),
    TemperedPowerLaw(0.8, 0.5, 0.7),
]

SETS = [FULL, iv(0, 1), iv(0.3, 2.2), JumpSet.of((0.1, 0.5), (1.0, math.inf)), iv(2, math.inf)]


def _quad(comp, kernel, A, lam):
    """Quadrature oracle built only from the density and the kernel formula."""
    total = 0.0
    if isinstance(comp, Atom):
        return comp.w * float(kernel_value(kernel, comp.loc, lam)) if A.contains(comp.loc) else 0.0
    for a, b in A.intervals:
        pts = [p for p in (1.0,) if a < p < b]
        f = lambda z: float(kernel_value(kernel, z, lam)) * comp.density(z)
        if isinstance(comp, TemperedPowerLaw) and a == 0.0:
            # z = u^k removes the endpoint singularity
            k = 1.0 / (1.0 - comp.alpha) if comp.alpha < 1 else 4.0
            hi = min(b, 1.0)
            g = lambda u: f(u**k) * k * u ** (k - 1)
            val, _ = sint.quad(g, 0.0, hi ** (1 / k), epsabs=0, epsrel=1e-12, limit=200)
            total += val
            a = hi
            if a >= b:
                continue
        if pts and math.isfinite(b):
            val, _ = sint.quad(f, a, b, points=pts, epsabs=0, epsrel=1e-12, limit=200)
        else:
            # split at the kink of the min/excess kernels by hand on infinite ranges
            val = sum(
                sint.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
                for lo, hi in ((a, 1.0), (1.0, b)) if lo < hi and a <= lo and hi <= b
            ) if a < 1.0 < b else sint.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
        total += val
    return total


def _finite_kernel(comp, kernel, A):
    if not isinstance(comp, TemperedPowerLaw) or not A.touches_zero():
        return True
    return kernel in ("z", "z2", "z_min_z2", "min1", "excess1", "z_gt1", "one_minus_exp", "compensated")


@pytest.mark.parametrize("comp", COMPONENTS, ids=repr)
@pytest.mark.parametrize("kernel", KERNELS)
def test_closed_forms_match_quadrature(comp, kernel):
    lam = 0.8 if kernel in LAMBDA_KERNELS else None
    for A in SETS:
        if not _finite_kernel(comp, kernel, A):
            continue
        got = comp.integrate(kernel, A, lam)
        want = _quad(comp, kernel, A, lam)
        assert got == pytest.approx(want, rel=1e-8, abs=1e-12), (A, got, want)


def test_restrict_matches_spec_examples():
    m = LevyMeasure((Atom(1.0, 1.0),))
    assert restrict(m, iv(0.5, 1.5)).mass() == 1.0
    assert restrict(m, iv(1.5, 2)).is_zero() or restrict(m, iv(1.5, 2)).mass() == 0.0
    e = LevyMeasure((ExpDensity(1.0, 1.0),))
    assert restrict(e, iv(0, math.log(2))).mass() == pytest.approx(0.5, abs=1e-15)


MEASURES = [
    LevyMeasure((Atom(1.0, 1.0), ExpDensity(1.5, 0.5))),
    LevyMeasure((TemperedPowerLaw(0.5, 1.0, 0.3), Atom(2.0, 0.2))),
]


@given(_sets(), _sets(), st.sampled_from(["one", "z", "min1", "exp", "compensated"]), st.sampled_from(MEASURES))
def test_additivity_and_restriction_composition(a, b, kernel, m):
    lam = 0.6 if kernel in LAMBDA_KERNELS else None
    a = a - JumpSet.of((0, 0.05))  # keep masses finite for power laws
    disjoint = b - a

    def I(mm, S):
        return mm.integrate(kernel, S, lam)

    assert I(m, a | disjoint) == pytest.approx(I(m, a) + I(m, disjoint), rel=1e-12, abs=1e-14)
    assert I(restrict(restrict(m, a), b), FULL) == pytest.approx(I(restrict(m, a & b), FULL), rel=1e-12, abs=1e-14)
    assert I(restrict(m, a), b) == pytest.approx(I(m, a & b), rel=1e-12, abs=1e-14)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_atom_sampling_is_deterministic(rng):
    m = LevyMeasure((Atom(1.0, 1.0),))
    assert np.all(sample(m, iv(0, 2), rng, 100) == 1.0)
    mix = LevyMeasure((Atom(1.0, 1.0), Atom(2.0, 1.0)))
    assert np.all(sample(mix, iv(1.5, 3), rng, 100) == 2.0)


def test_sampling_zero_mass_raises(rng):
    with pytest.raises(ZeroMass):
        sample(LevyMeasure((Atom(1.0, 1.0),)), iv(2, 3), rng)


def test_sampling_infinite_mass_raises(rng):
    with pytest.raises(DivergentIntegral):
        sample(LevyMeasure((TemperedPowerLaw(0.5, 1.0, 1.0),)), FULL, rng)


def test_exponential_sample_mean(rng):
    x = sample(LevyMeasure((ExpDensity(1.0, 1.0),)), FULL, rng, 10**6)
    assert abs(x.mean() - 1.0) < 0.004


def _cdf_of(comp, A):
    mass = comp.mass(A)

    def cdf(z):
        z = np.atleast_1d(z)
        return np.array([comp.mass(A & JumpSet.of((0, float(v)))) / mass if v > 0 else 0.0 for v in z])

    return cdf


@pytest.mark.parametrize(
    "comp,A",
    [
        (ExpDensity(1.3, 2.0), FULL),
        (ExpDensity(0.5, 1.0), JumpSet.of((0.2, 1.0), (3.0, 6.0))),
        (TemperedPowerLaw(0.5, 1.0, 1.0), iv(0.05, math.inf)),
        (TemperedPowerLaw(0.7, 3.0, 1.0), iv(0.5, 4.0)),
        (TemperedPowerLaw(0.2, 0.1, 1.0), iv(0.01, 50.0)),
    ],
    ids=repr,
)
def test_sampler_ks(comp, A):
    rng = np.random.default_rng(99)
    x = LevyMeasure((comp,)).sampler(A).draw(rng, 100_000)
    assert np.all(A.contains(x))
    # evaluate the exact cdf on a grid and interpolate (mass is monotone)
    grid = np.unique(np.concatenate([np.quantile(x, np.linspace(0, 1, 801)), [x.max()]]))
    cdf_grid = _cdf_of(comp, A)(grid)
    res = stats.kstest(x, lambda z: np.interp(z, grid, cdf_grid))
    assert res.pvalue > 0.001


def test_record_round_trip():
    for comp in COMPONENTS:
        rec = comp.to_json()
        assert component_from_record(rec) == comp
