"""Admissible CBI parameters, validation, jump censoring and counter lifting."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfiniteTotalMass, MomentConditionViolated, DivergentIntegral
from .measures import (
    FULL,
    INF,
    BoxSet,
    JumpSet,
    LevyMeasure,
    VectorMeasure,
)

MAX_LIFT_SETS = 12


def _vec(x, d, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if arr.shape == (1,) and d > 1:
        arr = np.full(d, arr[0])
    if arr.shape != (d,):
        raise ValueError(f"{name} must have length {d}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CbiParams:
    """Parameter tuple ``(d, c, beta, B, nu, mu)``.

    For ``d == 1`` the measures are :class:`LevyMeasure` objects; for
    ``d > 1`` they are :class:`VectorMeasure` objects.  Construction does not
    check admissibility, see :func:`validate`.
    """

    d: int
    c: np.ndarray
    beta: np.ndarray
    B: np.ndarray
    nu: object
    mu: tuple

    def __post_init__(self):
        d = int(self.d)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "c", _vec(self.c, d, "c"))
        object.__setattr__(self, "beta", _vec(self.beta, d, "beta"))
        B = np.atleast_2d(np.asarray(self.B, dtype=float)).copy()
        if B.shape != (d, d):
            raise ValueError(f"B must be {d}x{d}")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        mu = self.mu
        if isinstance(mu, (LevyMeasure, VectorMeasure)):
            mu = (mu,)
        mu = tuple(mu)
        if len(mu) != d:
            raise ValueError(f"mu must hold {d} measures")
        object.__setattr__(self, "mu", mu)
        for m in (self.nu,) + mu:
            if m.dim != d:
                raise ValueError("measure dimension does not match d")

    @classmethod
    def single(cls, c=0.0, beta=0.0, B=0.0, nu=None, mu=None) -> "CbiParams":
        """Convenience constructor for the single-type case."""
        return cls(
            1,
            [c],
            [beta],
            [[B]],
            nu if nu is not None else LevyMeasure.zero(),
            (mu if mu is not None else LevyMeasure.zero(),),
        )

    # scalar accessors for d == 1
    @property
    def c0(self) -> float:
        return float(self.c[0])

    @property
    def beta0(self) -> float:
        return float(self.beta[0])

    @property
    def B0(self) -> float:
        return float(self.B[0, 0])

    @property
    def mu0(self):
        return self.mu[0]

    def replace(self, **kw) -> "CbiParams":
        args = dict(d=self.d, c=self.c, beta=self.beta, B=self.B, nu=self.nu, mu=self.mu)
        args.update(kw)
        return CbiParams(**args)

    def to_json(self) -> dict:
        if self.d == 1:
            return {
                "d": 1,
                "c": self.c0,
                "beta": self.beta0,
                "B": self.B0,
                "nu": self.nu.to_json(),
                "mu": self.mu0.to_json(),
            }
        return {
            "d": self.d,
            "c": self.c.tolist(),
            "beta": self.beta.tolist(),
            "B": self.B.tolist(),
            "nu": self.nu.to_json(),
            "mu": [m.to_json() for m in self.mu],
        }


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    value: float | None = None
    note: str = ""

    def to_json(self) -> dict:
        v = self.value
        if v is not None and not math.isfinite(v):
            v = "inf" if v > 0 else "-inf"
        return {"condition": self.name, "passed": self.passed, "value": v, "note": self.note}


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple[Condition, ...]

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.conditions if c.name != "first_moment")

    @property
    def first_moment_ok(self) -> bool:
        return self.condition("first_moment").passed

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def to_json(self) -> list[dict]:
        return [c.to_json() for c in self.conditions]


def _safe(fn):
    try:
        return float(fn())
    except DivergentIntegral:
        return INF


def _vector_norm_integrals(m: VectorMeasure, i: int | None):
    """(int 1 ^ |r|, int |r| 1{|r|>=1}) or the mu_i moment for a vector measure."""
    if i is None:
        small = _safe(lambda: m.expect(lambda z: min(1.0, float(np.linalg.norm(z)))))
        big = _safe(lambda: m.expect(lambda z: _big(float(np.linalg.norm(z)))))
        return small, big

    def g(z):
        n = float(np.linalg.norm(z))
        others = sum(min(1.0, z[j]) for j in range(len(z)) if j != i)
        return min(n, n * n) + others

    return _safe(lambda: m.expect(g))


def _big(n):
    return n if n >= 1.0 else 0.0


def _lifted_mu_moment(m: VectorMeasure, i: int) -> float:
    # pieces with a zero offset may be infinite-activity: use closed forms there
    total = 0.0
    rest = []
    for comp, off in m.pieces:
        if i == 0 and not any(off):
            total += _safe(lambda: comp.integrate("z_min_z2"))
        else:
            rest.append((comp, off))
    sub = VectorMeasure(m.d, m.atoms, tuple(rest))
    return total + _vector_norm_integrals(sub, i)


def _lifted_nu_integrals(m: VectorMeasure):
    small = big = 0.0
    rest = []
    for comp, off in m.pieces:
        if not any(off):
            small += _safe(lambda: comp.integrate("min1"))
            big += _safe(lambda: comp.integrate("z_gt1")) + _atom_at_one(comp)
        else:
            rest.append((comp, off))
    s2, b2 = _vector_norm_integrals(VectorMeasure(m.d, m.atoms, tuple(rest)), None)
    return small + s2, big + b2


def _atom_at_one(comp):
    # z_gt1 excludes z == 1 while the moment condition includes it
    from .measures import Atom

    if isinstance(comp, Atom) and comp.loc == 1.0 and comp.support.contains(1.0):
        return comp.w
    return 0.0


def validate(p: CbiParams) -> ValidationReport:
    """Check each admissibility condition and the first-moment condition."""
    conds = [Condition("d_positive_integer", p.d >= 1, float(p.d))]
    conds.append(Condition("c_nonnegative", bool(np.all(p.c >= 0)), float(p.c.min())))
    conds.append(Condition("beta_nonnegative", bool(np.all(p.beta >= 0)), float(p.beta.min())))
    off = p.B[~np.eye(p.d, dtype=bool)]
    worst = float(off.min()) if off.size else 0.0
    conds.append(
        Condition("B_essentially_nonnegative", worst >= 0, worst, "minimum off-diagonal entry")
    )
    if p.d == 1:
        small = _safe(lambda: p.nu.integrate("min1"))
        big = _safe(lambda: p.nu.integrate("z_gt1")) + sum(
            _atom_at_one(c) for c in p.nu.components
        )
        mu_vals = [_safe(lambda: p.mu0.integrate("z_min_z2"))]
    else:
        small, big = _lifted_nu_integrals(p.nu)
        mu_vals = [_lifted_mu_moment(m, i) for i, m in enumerate(p.mu)]
    conds.append(
        Condition("nu_levy_moment", math.isfinite(small), small, "int (1 ^ |r|) nu(dr)")
    )
    for i, v in enumerate(mu_vals):
        conds.append(
            Condition(
                f"mu_{i + 1}_levy_moment",
                math.isfinite(v),
                v,
                "int (|z| ^ |z|^2 + sum_{j!=i} 1 ^ z_j) mu_i(dz)",
            )
        )
    conds.append(Condition("first_moment", math.isfinite(big), big, "int |r| 1{|r|>=1} nu(dr)"))
    return ValidationReport(tuple(conds))


# ---------------------------------------------------------------------------
# derived parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearCoefficients:
    B_tilde: np.ndarray
    beta_tilde: np.ndarray


def effective_linear(p: CbiParams) -> LinearCoefficients:
    """Drift matrix and vector of the first-moment equation."""
    if not validate(p).first_moment_ok:
        raise MomentConditionViolated("int |r| 1{|r|>=1} nu(dr) is infinite")
    d = p.d
    Bt = np.array(p.B, dtype=float)
    if d == 1:
        Bt[0, 0] += p.mu0.integrate("excess1")
        bt = p.beta + p.nu.integrate("z")
    else:
        for i in range(d):
            for j in range(d):
                Bt[i, j] += p.mu[j].expect(lambda z: max(z[i] - (1.0 if i == j else 0.0), 0.0))
        bt = p.beta + np.array([p.nu.expect(lambda z, i=i: z[i]) for i in range(d)])
    return LinearCoefficients(Bt, np.asarray(bt, dtype=float))


@dataclass(frozen=True)
class FiniteCheck:
    finite: bool
    total_mass: float
    bounded_away_from_zero: bool

    def __bool__(self):
        return self.finite


def _set_mass(m, A) -> float:
    if isinstance(m, LevyMeasure):
        return m.mass(A)
    return m.mass(A)


def finite_on(p: CbiParams, A) -> FiniteCheck:
    """Whether nu(A) + sum_i mu_i(A) is finite."""
    total = math.fsum([_set_mass(p.nu, A)] + [_set_mass(m, A) for m in p.mu])
    if isinstance(A, JumpSet):
        away = not A.touches_zero()
    else:
        away = all(any(lo > 0 for lo in box_lo) for box_lo, _ in A.boxes)
    return FiniteCheck(math.isfinite(total), total, away)


def _require_finite(p, A):
    chk = finite_on(p, A)
    if not chk.finite:
        raise InfiniteTotalMass(f"total Levy mass of {A!r} is infinite")
    return chk


def _check_set_dim(p, A):
    if p.d == 1 and not isinstance(A, JumpSet):
        raise TypeError("single-type parameters take a JumpSet")
    if p.d > 1 and not isinstance(A, BoxSet):
        raise TypeError("multi-type parameters take a BoxSet")


def restrict_for_jumps(p: CbiParams, A) -> CbiParams:
    """Parameters of the process with every jump of size in ``A`` removed."""
    _check_set_dim(p, A)
    _require_finite(p, A)
    B = np.array(p.B, dtype=float)
    if p.d == 1:
        B[0, 0] -= p.mu0.integrate("min1", A)
        return p.replace(B=B, nu=p.nu.restrict(~A), mu=(p.mu0.restrict(~A),))
    for i in range(p.d):
        inside = p.mu[i].restrict(A, keep_inside=True)
        B[i, i] -= inside.expect(lambda z, i=i: min(1.0, z[i]))
    return p.replace(
        B=B,
        nu=p.nu.restrict(A, keep_inside=False),
        mu=tuple(m.restrict(A, keep_inside=False) for m in p.mu),
    )


def sign_cells(sets: Sequence[JumpSet]):
    """Yield ``(counter vector, cell)`` for every nonempty cell of the partition.

    The counter vector has entry 1 where the cell lies inside ``A_i`` and 0
    where it lies in the complement.
    """
    k = len(sets)
    for bits in itertools.product((0, 1), repeat=k):
        cell = FULL
        for bit, s in zip(bits, sets):
            cell = cell & (s if bit else ~s)
            if cell.is_empty():
                break
        if not cell.is_empty():
            yield bits, cell


def lift_with_counters(p: CbiParams, sets: Sequence[JumpSet]) -> CbiParams:
    """Parameters of the (k+1)-type process (X, J(A_1), ..., J(A_k))."""
    if p.d != 1:
        raise ValueError("counter lifting needs single-type parameters")
    k = len(sets)
    if k == 0:
        raise ValueError("need at least one set")
    if k > MAX_LIFT_SETS:
        raise ValueError(f"at most {MAX_LIFT_SETS} sets are supported")
    for A in sets:
        _require_finite(p, A)

    def lift(m: LevyMeasure) -> VectorMeasure:
        pieces = []
        for bits, cell in sign_cells(sets):
            off = (0.0,) + tuple(float(b) for b in bits)
            for comp in m.components:
                r = comp.restrict(cell)
                if r is not None:
                    pieces.append((r, off))
        return VectorMeasure(k + 1, (), tuple(pieces))

    d = k + 1
    c = np.zeros(d)
    c[0] = p.c0
    beta = np.zeros(d)
    beta[0] = p.beta0
    B = np.zeros((d, d))
    B[0, 0] = p.B0
    mu = (lift(p.mu0),) + tuple(VectorMeasure(d) for _ in range(k))
    return CbiParams(d, c, beta, B, lift(p.nu), mu)
