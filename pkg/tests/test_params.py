from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sint

from cbijump.errors import DivergentIntegral, InfiniteTotalMass, MomentConditionViolated
from cbijump.measures import FULL, Atom, JumpSet, LevyMeasure, TemperedPowerLaw, VectorMeasure
from cbijump.params import (
    CbiParams,
    effective_linear,
    finite_on,
    lift_with_counters,
    restrict_for_jumps,
    validate,
)

from conftest import iv, single


def test_feller_is_admissible():
    rep = validate(single(c=1.0, B=-1.0))
    assert rep.ok and not rep.failures()


def test_negative_off_diagonal_fails():
    p = CbiParams(2, [0, 0], [0, 0], [[0, -0.1], [0, 0]], VectorMeasure(2), (VectorMeasure(2), VectorMeasure(2)))
    rep = validate(p)
    assert not rep.condition("B_essentially_nonnegative").passed
    assert not rep.admissible


def test_tempered_power_law_immigration_first_moment():
    p = single(nu=[TemperedPowerLaw(0.5, 1.0, 1.0)])
    rep = validate(p)
    assert rep.first_moment_ok
    want, _ = sint.quad(lambda r: r * r**-1.5 * math.exp(-r), 1.0, math.inf, epsrel=1e-12)
    assert rep.condition("first_moment").value == pytest.approx(want, rel=1e-9)


def test_negative_c_and_beta_fail():
    rep = validate(single(c=-1.0, beta=-0.1))
    assert set(rep.failures()) >= {"c_nonnegative", "beta_nonnegative"}


def test_effective_linear_examples():
    assert effective_linear(single(mu=[Atom(1.0, 1.0)])).B_tilde[0, 0] == 0.0
    assert effective_linear(single(mu=[Atom(2.0, 0.5)])).B_tilde[0, 0] == pytest.approx(0.5)
    assert effective_linear(single(nu=[Atom(3.0, 2.0)])).beta_tilde[0] == pytest.approx(6.0)


class _HeavyTail(Atom):
    """Atom at 2 whose first moment above 1 is declared divergent."""

    def integrate(self, kernel, s=FULL, lam=None):
        if kernel in ("z_gt1", "z") and s.contains(self.loc):
            raise DivergentIntegral("heavy tail")
        return super().integrate(kernel, s, lam)


def test_moment_condition_guards():
    p = single(nu=[_HeavyTail(2.0, 1.0)])
    rep = validate(p)
    assert rep.admissible and not rep.first_moment_ok
    with pytest.raises(MomentConditionViolated):
        effective_linear(p)


def test_restrict_for_jumps_examples():
    r = restrict_for_jumps(single(mu=[Atom(1.0, 1.0)]), iv(0.5, 1.5))
    assert r.B0 == -1.0 and r.mu0.mass() == 0.0
    p = single(mu=[Atom(1.0, 0.3), Atom(2.0, 0.7)])
    r = restrict_for_jumps(p, iv(1.5, 2.5))
    assert r.B0 == pytest.approx(-0.7)
    assert r.mu0.mass() == pytest.approx(0.3) and r.mu0.mass(iv(0.5, 1.5)) == pytest.approx(0.3)
    same = restrict_for_jumps(p, JumpSet.empty())
    assert same.B0 == p.B0 and same.mu0.mass() == p.mu0.mass()


def test_restrict_for_jumps_infinite_mass():
    with pytest.raises(InfiniteTotalMass):
        restrict_for_jumps(single(mu=[TemperedPowerLaw(0.5, 1.0, 1.0)]), iv(0, 1))


def test_finite_on_examples():
    tpl = single(mu=[TemperedPowerLaw(0.5, 1.0, 1.0)])
    assert not finite_on(tpl, iv(0, 1))
    chk = finite_on(tpl, iv(0.1, math.inf))
    assert chk.finite and chk.bounded_away_from_zero
    chk = finite_on(single(mu=[Atom(1.0, 1.0)]), iv(0, 1))
    assert chk.finite and not chk.bounded_away_from_zero


def _lifted_atoms(m: VectorMeasure):
    """Atom pieces of a lifted measure as (location, mass) pairs."""
    out = []
    for comp, off in m.pieces:
        assert isinstance(comp, Atom)
        out.append(((comp.loc,) + off[1:], comp.w))
    return out


def test_lift_examples():
    p = single(mu=[Atom(1.0, 1.0)])
    L = lift_with_counters(p, [iv(0.5, 1.5)])
    assert L.d == 2
    assert _lifted_atoms(L.mu[0]) == [((1.0, 1.0), 1.0)]
    assert L.nu.is_zero() and L.mu[1].is_zero()
    L2 = lift_with_counters(p, [iv(0.5, 1.5), iv(0.5, 1.5)])
    assert _lifted_atoms(L2.mu[0]) == [((1.0, 1.0, 1.0), 1.0)]
    L3 = lift_with_counters(p, [iv(2, 3)])
    assert _lifted_atoms(L3.mu[0]) == [((1.0, 0.0), 1.0)]
    assert validate(L).admissible


def test_lifted_params_pass_validation(rich):
    L = lift_with_counters(rich, [iv(0.5, 2.0), iv(1.0, math.inf)])
    assert validate(L).ok


atom_lists = st.lists(
    st.tuples(st.sampled_from([0.25, 0.5, 1.0, 1.5, 2.0, 3.0]), st.floats(0.0, 2.0)), min_size=1, max_size=4
)
intervals = st.tuples(st.floats(0.0, 3.0), st.floats(0.1, 3.0)).map(lambda ab: iv(ab[0], ab[0] + ab[1]))


@given(atom_lists, st.floats(-2, 2), intervals, intervals)
def test_restriction_properties(atoms, B, A, S):
    p = single(B=B, mu=[Atom(z, w) for z, w in atoms])
    once = restrict_for_jumps(p, A)
    twice = restrict_for_jumps(once, A)
    for k in ("one", "z", "min1"):
        assert twice.mu0.integrate(k, S) == pytest.approx(once.mu0.integrate(k, S), rel=1e-12, abs=1e-15)
    assert twice.B0 == pytest.approx(once.B0, rel=1e-12, abs=1e-15)
    assert effective_linear(once).B_tilde[0, 0] <= effective_linear(p).B_tilde[0, 0] + 1e-12
    assert validate(once).ok
