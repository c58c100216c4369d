"""Independent ground truth for the survival formulas.

* ``ctmc_survival``: when ``c = 0``, ``beta = 0``, all jump measures are atoms
  on a lattice ``h Z`` and ``B = int (1 ^ z) mu(dz)``, the process is frozen
  between jumps and is a continuous-time Markov chain on ``{0, h, 2h, ...}``.
  Survival is the mass of a sub-generator exponential, computed by
  uniformization on a truncated lattice with an overflow state.
* ``closed_form_survival``: a catalog of analytically solvable cases.
* ``convergence_probe``: monotone approximation of the censored flow by the
  joint Laplace flow with large counter arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import sparse, stats

from .errors import CaseMismatch, PreconditionViolated, TruncationTooSmall
from .measures import FULL, Atom, JumpSet
from .mechanisms import union_of
from .odeflow import DEFAULT_CONFIG, SolverConfig, flow_v_joint, flow_v_set
from .params import CbiParams, finite_on

POISSON_TAIL = 1e-16


# ---------------------------------------------------------------------------
# lattice CTMC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeSpec:
    """Truncation level ``N`` (largest state index) and lattice step ``h``."""

    N: int = 400
    h: float = 1.0
    tol: float = 1e-8
    max_N: int = 6400

    def __post_init__(self):
        if self.N < 1 or not self.h > 0:
            raise ValueError("need N >= 1 and h > 0")

    @classmethod
    def for_params(cls, p: CbiParams, x: float, **kw) -> "LatticeSpec":
        """Coarsest step dividing ``x`` and every atom location."""
        vals = [Fraction(float(x)).limit_denominator(10**6)]
        for m in (p.mu0, p.nu):
            vals += [Fraction(a.loc).limit_denominator(10**6) for a in m.atoms()]
        vals = [v for v in vals if v != 0]
        if not vals:
            return cls(h=1.0, **kw)
        num = 0
        den = 1
        for v in vals:
            den = den * v.denominator // math.gcd(den, v.denominator)
        for v in vals:
            num = math.gcd(num, int(v * den))
        return cls(h=num / den, **kw)


@dataclass(frozen=True)
class OracleValue:
    value: float
    bound: float
    N: int

    def to_json(self) -> dict:
        return {"value": self.value, "truncation_bound": self.bound, "N": self.N}


def _lattice_index(z: float, h: float) -> int:
    k = round(z / h)
    if k < 0 or abs(k * h - z) > 1e-9 * max(1.0, abs(z)):
        raise PreconditionViolated(f"{z} is not on the lattice with step {h}")
    return int(k)


def _lattice_rates(p: CbiParams, x: float, spec: LatticeSpec):
    if p.d != 1:
        raise PreconditionViolated("lattice oracle is single-type")
    if p.c0 != 0.0 or p.beta0 != 0.0:
        raise PreconditionViolated("lattice oracle needs c = 0 and beta = 0")
    mu_atoms = p.mu0.atoms()
    nu_atoms = p.nu.atoms()
    if len(mu_atoms) != len(p.mu0.components) or len(nu_atoms) != len(p.nu.components):
        raise PreconditionViolated("lattice oracle needs purely atomic measures")
    drift = p.B0 - p.mu0.integrate("min1")
    if abs(drift) > 1e-12 * max(1.0, abs(p.B0)):
        raise PreconditionViolated("lattice oracle needs B = int (1 ^ z) mu(dz)")
    h = spec.h
    branch = [(_lattice_index(a.loc, h), a.loc, a.w) for a in mu_atoms]
    immig = [(_lattice_index(a.loc, h), a.loc, a.w) for a in nu_atoms]
    return _lattice_index(float(x), h), branch, immig


def _sub_generator(N: int, h: float, branch, immig, marked: JumpSet):
    """Uniformized transition matrix over states ``0..N`` plus overflow ``N+1``.

    Marked transitions are removed (their mass is killed), the diagonal keeps
    the full outflow rate.
    """
    n_states = N + 2
    idx = np.arange(N + 1)
    out_rate = idx * h * sum(w for _, _, w in branch) + sum(w for _, _, w in immig)
    Lam = float(out_rate.max()) if N >= 0 else 0.0
    if Lam == 0.0:
        P = sparse.identity(n_states, format="csr")
        return P, 0.0
    rows, cols, vals = [], [], []
    for k, loc, w in branch:
        if marked.contains(loc):
            continue
        rows.append(idx)
        cols.append(np.minimum(idx + k, N + 1))
        vals.append(idx * h * w / Lam)
    for k, loc, w in immig:
        if marked.contains(loc):
            continue
        rows.append(idx)
        cols.append(np.minimum(idx + k, N + 1))
        vals.append(np.full(N + 1, w / Lam))
    rows.append(idx)
    cols.append(idx)
    vals.append(1.0 - out_rate / Lam)
    rows.append(np.array([N + 1]))
    cols.append(np.array([N + 1]))
    vals.append(np.array([1.0]))
    P = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_states, n_states)
    )
    return P, Lam


def _uniformize(pi: np.ndarray, P, Lam: float, t: float):
    """``pi exp(t Q)`` with ``Q = Lam (P - I)``; returns the row and the dropped Poisson tail."""
    if t == 0.0 or Lam == 0.0:
        return pi.copy(), 0.0
    mean = Lam * t
    k_max = int(stats.poisson.isf(POISSON_TAIL, mean)) + 1
    weights = stats.poisson.pmf(np.arange(k_max + 1), mean)
    PT = P.T.tocsr()
    acc = weights[0] * pi
    term = pi
    for k in range(1, k_max + 1):
        term = PT @ term
        if weights[k] > 0:
            acc = acc + weights[k] * term
    tail = max(0.0, 1.0 - math.fsum(weights))
    return acc, tail


def _ctmc_once(spec: LatticeSpec, p, x, pairs):
    x_idx, branch, immig = _lattice_rates(p, x, spec)
    N = spec.N
    if x_idx > N:
        raise TruncationTooSmall(f"initial state index {x_idx} exceeds N={N}")
    pi = np.zeros(N + 2)
    pi[x_idx] = 1.0
    sets = [A for A, _ in pairs]
    times = [float(t) for _, t in pairs]
    prev = 0.0
    tails = []
    for i, t in enumerate(times):
        P, Lam = _sub_generator(N, spec.h, branch, immig, union_of(sets[i:]))
        pi, tail = _uniformize(pi, P, Lam, t - prev)
        tails.append(tail)
        prev = t
    value = math.fsum(pi[: N + 1])
    bound = float(pi[N + 1]) + math.fsum(tails)
    return OracleValue(value, bound, N)


def ctmc_survival(
    spec: LatticeSpec, p: CbiParams, x: float, pairs: Sequence[tuple[JumpSet, float]]
) -> OracleValue:
    """``P_x(tau_{A_1} > t_1, ..., tau_{A_k} > t_k)`` on the lattice.

    Truncation is doubled from ``spec.N`` until the bound (overflow mass plus
    uniformization tails) is below ``spec.tol``.
    """
    times = [float(t) for _, t in pairs]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise PreconditionViolated("pairs must be sorted by nonnegative time")
    N = spec.N
    while True:
        res = _ctmc_once(LatticeSpec(N, spec.h, spec.tol, spec.max_N), p, x, pairs)
        if res.bound <= spec.tol:
            return res
        if N * 2 > spec.max_N:
            raise TruncationTooSmall(
                f"truncation bound {res.bound:.3e} exceeds {spec.tol:.1e} at N={N}"
            )
        N *= 2


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


CATALOG = ("pure_immigration", "inhomogeneous_poisson", "frozen_lattice")


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def closed_form_survival(case: str, p: CbiParams, x: float, t: float, A: JumpSet) -> float:
    """``P_x(tau_A > t)`` for an analytically solvable parameter pattern.

    pure_immigration
        ``mu(A) = 0``: the censored flow stays at zero, value ``exp(-nu(A) t)``.
    inhomogeneous_poisson
        ``c = 0``, ``beta = 0`` and ``mu``, ``nu`` carried by ``A``.  Between
        marked jumps ``X_u = x e^{b u}`` with ``b = B - int_A (1 ^ z) mu``, so
        ``tau_A`` is the first point of a Poisson process of intensity
        ``mu(A) x e^{b u} + nu(A)``.
    frozen_lattice
        ``c = beta = 0``, ``nu = 0``, ``B = int (1 ^ z) mu`` and ``A`` carries
        ``mu``: the state is frozen at ``x`` until the first jump, value
        ``exp(-x mu(U_1) t)``.
    """
    if p.d != 1:
        raise CaseMismatch("closed forms are single-type")
    Ac = ~A
    if case == "pure_immigration":
        if p.mu0.mass(A) != 0.0:
            raise CaseMismatch("pure_immigration needs mu(A) = 0")
        return math.exp(-p.nu.mass(A) * t)
    if case == "inhomogeneous_poisson":
        if p.c0 != 0.0 or p.beta0 != 0.0 or p.mu0.mass(Ac) != 0.0 or p.nu.mass(Ac) != 0.0:
            raise CaseMismatch("inhomogeneous_poisson needs c = beta = 0 and mu, nu carried by A")
        b = p.B0 - p.mu0.integrate("min1", A)
        growth = t if b == 0.0 else math.expm1(b * t) / b
        return math.exp(-p.nu.mass(A) * t - x * p.mu0.mass(A) * growth)
    if case == "frozen_lattice":
        if p.c0 != 0.0 or p.beta0 != 0.0 or not p.nu.is_zero():
            raise CaseMismatch("frozen_lattice needs c = beta = 0 and nu = 0")
        if p.mu0.mass(Ac) != 0.0:
            raise CaseMismatch("frozen_lattice needs A to carry mu")
        if not _close(p.B0, p.mu0.integrate("min1")):
            raise CaseMismatch("frozen_lattice needs B = int (1 ^ z) mu(dz)")
        return math.exp(-x * p.mu0.mass() * t)
    raise CaseMismatch(f"unknown catalog case {case!r}; known: {', '.join(CATALOG)}")


# ---------------------------------------------------------------------------
# convergence probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    s_grid: tuple[float, ...]
    values: tuple[float, ...]
    bound: float
    gaps: tuple[float, ...]
    slack: float
    monotone: bool
    bounded: bool
    gap_nonincreasing: bool

    @property
    def final_gap(self) -> float:
        return self.gaps[-1]

    @property
    def ok(self) -> bool:
        return self.monotone and self.bounded and self.gap_nonincreasing

    def to_json(self) -> dict:
        return {
            "s": list(self.s_grid),
            "values": list(self.values),
            "bound": self.bound,
            "gaps": list(self.gaps),
            "slack": self.slack,
            "monotone": self.monotone,
            "bounded": self.bounded,
            "gap_nonincreasing": self.gap_nonincreasing,
        }


def convergence_probe(
    p: CbiParams,
    sets: Sequence[JumpSet],
    lam0: float,
    lam: Sequence[float],
    t: float,
    s_grid: Sequence[float],
    eta: Callable[[float], float] | None = None,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> ProbeReport:
    """Evaluate ``v^(k)(t, eta(s), s lam)`` along ``s_grid`` against the censored flow.

    The joint flow with counter arguments ``s lam`` increases in ``s`` towards
    the flow censored on ``A_lam`` (the union of sets with ``lam_i > 0``),
    started at ``lam0``.  Comparisons allow a slack of ten solver tolerances.
    """
    if p.d != 1:
        raise ValueError("probe is single-type")
    s_grid = [float(s) for s in s_grid]
    if any(b <= a for a, b in zip(s_grid, s_grid[1:])):
        raise ValueError("s-grid must be increasing")
    lam = [float(l) for l in lam]
    if len(lam) != len(sets) or any(l < 0 for l in lam):
        raise ValueError("need one nonnegative lam per set")
    for A in sets:
        if not finite_on(p, A):
            raise PreconditionViolated("probe sets must have finite total mass")
    if eta is None:
        eta = lambda s: lam0
    A_lam = union_of([A for A, l in zip(sets, lam) if l > 0])
    bound = flow_v_set(p, A_lam, lam0, t, cfg).value(t)
    values = []
    for s in s_grid:
        e = float(eta(s))
        if e > lam0:
            raise ValueError("eta must not exceed lam0")
        sol = flow_v_joint(p, sets, e, [s * l for l in lam], t, cfg)
        values.append(sol.value(t))
    slack = 10.0 * (cfg.rel_tol * abs(bound) + cfg.abs_tol)
    gaps = [bound - v for v in values]
    monotone = all(b >= a - slack for a, b in zip(values, values[1:]))
    bounded = all(v <= bound + slack for v in values)
    gap_ok = all(b <= a + slack for a, b in zip(gaps, gaps[1:]))
    return ProbeReport(tuple(s_grid), tuple(values), bound, tuple(gaps), slack, monotone, bounded, gap_ok)
