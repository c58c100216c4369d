"""ODE flows of the branching mechanisms.

All flows are integrated by an embedded Dormand-Prince 5(4) pair with its
quartic dense output.  The immigration integral ``int_0^t psi(v(s)) ds`` is
carried as an extra state component, so it is under the same error control as
``v`` itself.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CbiError, InfiniteTotalMass, StepSizeUnderflow, UnsortedTimes
from .mechanisms import JointCells, phi, psi, union_of
from .measures import JumpSet
from .params import CbiParams, _require_finite, restrict_for_jumps


class SolverBudgetExceeded(CbiError):
    """Wall-clock budget of a single solve ran out."""


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    max_time: float | None = None  # wall-clock seconds per solve

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


DEFAULT_CONFIG = SolverConfig()

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic continuous extension, y(t + x h) = y + h * (K^T P) @ [x, x^2, x^3, x^4]
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class FlowSolution:
    """Dense solution of ``v' = f(v)`` on ``[0, T]`` plus the psi integral.

    ``y_nodes[:, :dim]`` holds ``v`` and ``y_nodes[:, dim]`` the accumulated
    immigration integral.
    """

    horizon: float
    dim: int
    t_nodes: np.ndarray
    y_nodes: np.ndarray
    coeffs: np.ndarray  # (steps, state, 4)
    n_rhs: int = 0
    n_rejected: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.t_nodes) - 1

    def state(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0) or np.any(t_arr > self.horizon * (1 + 1e-12) + 1e-300):
            raise ValueError(f"t outside [0, {self.horizon}]")
        out = np.empty((t_arr.size, self.y_nodes.shape[1]))
        if self.n_steps == 0:
            out[:] = self.y_nodes[0]
        else:
            idx = np.clip(np.searchsorted(self.t_nodes, t_arr, side="right") - 1, 0, self.n_steps - 1)
            for n, (tt, i) in enumerate(zip(t_arr, idx)):
                t0, t1 = self.t_nodes[i], self.t_nodes[i + 1]
                h = t1 - t0
                if tt >= t1:
                    out[n] = self.y_nodes[i + 1]
                    continue
                x = (tt - t0) / h
                powers = np.array([x, x * x, x**3, x**4])
                out[n] = self.y_nodes[i] + h * (self.coeffs[i] @ powers)
        return out

    def v(self, t):
        """``v(t)``: a d-vector for scalar ``t``, an array of rows otherwise."""
        s = self.state(t)[:, : self.dim]
        return s[0] if np.ndim(t) == 0 else s

    def value(self, t) -> float:
        """Scalar flows: ``v(t)`` as a float."""
        return float(self.state(t)[0, 0])

    def psi_integral(self, t):
        s = self.state(t)[:, self.dim]
        return float(s[0]) if np.ndim(t) == 0 else s

    @property
    def final(self) -> np.ndarray:
        return self.y_nodes[-1, : self.dim].copy()

    @property
    def final_psi(self) -> float:
        return float(self.y_nodes[-1, self.dim])

    def to_csv(self, path, grid=None):
        ts = self.t_nodes if grid is None else np.asarray(grid, dtype=float)
        rows = self.state(ts)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"v_{i + 1}" for i in range(self.dim)] + ["psi_integral"])
            for t, row in zip(ts, rows):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def _initial_step(f, y0, f0, cfg, horizon):
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, horizon)
    y1 = y0 + h0 * f0
    f1 = f(y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, horizon, cfg.max_step)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    y0,
    horizon: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    nonneg: int = 0,
    dim: int | None = None,
) -> FlowSolution:
    """Adaptive Dormand-Prince integration of the autonomous system ``y' = f(y)``.

    The first ``nonneg`` components are kept nonnegative: a step that pushes
    one of them below ``-abs_tol`` is rejected and halved, values within
    ``abs_tol`` of zero are floored to zero.
    """
    y = np.array(y0, dtype=float)
    m = y.size
    dim = m - 1 if dim is None else dim
    horizon = float(horizon)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    ts = [0.0]
    ys = [y.copy()]
    qs = []
    if horizon == 0.0:
        return FlowSolution(0.0, dim, np.array(ts), np.array(ys), np.zeros((0, m, 4)))

    started = time.monotonic()
    fy = f(y)
    n_rhs = 1
    h = _initial_step(f, y, fy, cfg, horizon)
    n_rhs += 1
    t = 0.0
    rejected = 0
    K = np.empty((7, m))
    while t < horizon:
        if cfg.max_time is not None and time.monotonic() - started > cfg.max_time:
            raise SolverBudgetExceeded(f"solver exceeded {cfg.max_time}s at t={t}")
        min_h = 16 * np.finfo(float).eps * max(abs(t), 1.0)
        h = min(h, cfg.max_step)
        last = t + h >= horizon * (1 - 1e-14)
        if last:
            h = horizon - t
        elif h < min_h:
            raise StepSizeUnderflow(t, h)
        K[0] = fy
        for s in range(1, 6):
            K[s] = f(y + h * (np.asarray(_A[s]) @ K[:s]))
        y_new = y + h * (_B @ K[:6])
        f_new = f(y_new)
        K[6] = f_new
        n_rhs += 6
        err = h * (_E @ K)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if err_norm > 1.0 or not np.all(np.isfinite(y_new)):
            factor = MIN_FACTOR if not np.isfinite(err_norm) else max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            h *= factor
            rejected += 1
            continue
        if nonneg and np.any(y_new[:nonneg] < -cfg.abs_tol):
            h *= 0.5
            rejected += 1
            continue
        if nonneg:
            neg = y_new[:nonneg] < 0
            if np.any(neg):
                y_new[:nonneg][neg] = 0.0
                f_new = f(y_new)
                n_rhs += 1
        qs.append(K.T @ _P)
        t = horizon if last else t + h
        y = y_new
        fy = f_new
        ts.append(t)
        ys.append(y.copy())
        factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
        h *= factor
    return FlowSolution(horizon, dim, np.array(ts), np.array(ys), np.array(qs), n_rhs, rejected)


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


def _clip(v):
    return np.maximum(v, 0.0)


def flow_v(p: CbiParams, lam, T: float, cfg: SolverConfig = DEFAULT_CONFIG) -> FlowSolution:
    """Solve ``v' = -phi(v)``, ``v(0) = lam`` with the psi integral attached."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (p.d,):
        raise ValueError(f"lam must have length {p.d}")
    if np.any(lam < 0):
        raise ValueError("lam must be nonnegative")
    d = p.d

    def rhs(y):
        v = _clip(y[:d])
        out = np.empty(d + 1)
        out[:d] = -phi(p, v)
        out[d] = psi(p, v)
        return out

    return integrate(rhs, np.append(lam, 0.0), T, cfg, nonneg=d, dim=d)


def flow_v_joint(
    p: CbiParams,
    sets: Sequence[JumpSet],
    lam0: float,
    lam: Sequence[float],
    T: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    cells: JointCells | None = None,
) -> FlowSolution:
    """First coordinate of the lifted flow; the counters stay at ``lam``."""
    if lam0 < 0 or any(l < 0 for l in lam):
        raise ValueError("arguments must be nonnegative")
    if len(lam) != len(sets):
        raise ValueError("need one lam per set")
    cells = cells or JointCells(p, sets)
    lam = [float(l) for l in lam]

    def rhs(y):
        v = max(y[0], 0.0)
        return np.array([-cells.phi(v, lam), cells.psi(v, lam)])

    return integrate(rhs, [float(lam0), 0.0], T, cfg, nonneg=1, dim=1)


def _marked_rhs(p: CbiParams, A):
    r = restrict_for_jumps(p, A)
    d = p.d
    if d == 1:
        marked = np.array([p.mu0.mass(A)])
    else:
        marked = np.array([m.mass(A) for m in p.mu])

    def rhs(y):
        v = _clip(y[:d])
        out = np.empty(d + 1)
        out[:d] = marked - phi(r, v)
        out[d] = psi(r, v)
        return out

    return rhs


def flow_v_marked(p: CbiParams, A, T: float, cfg: SolverConfig = DEFAULT_CONFIG) -> FlowSolution:
    """Solve ``v' = mu(A) - phi^(A)(v)``, ``v(0) = 0``; integral of ``psi^(A)``."""
    _require_finite(p, A)
    rhs = _marked_rhs(p, A)
    return integrate(rhs, np.zeros(p.d + 1), T, cfg, nonneg=p.d, dim=p.d)


def flow_v_set(
    p: CbiParams, C: JumpSet, lam0: float, T: float, cfg: SolverConfig = DEFAULT_CONFIG
) -> FlowSolution:
    """Single-type limit flow ``v' = mu(C) - phi^(C)(v)``, ``v(0) = lam0``."""
    if p.d != 1:
        raise ValueError("flow_v_set is single-type")
    if lam0 < 0:
        raise ValueError("lam0 must be nonnegative")
    _require_finite(p, C)
    rhs = _marked_rhs(p, C)
    return integrate(rhs, [float(lam0), 0.0], T, cfg, nonneg=1, dim=1)


# ---------------------------------------------------------------------------
# recursions
# ---------------------------------------------------------------------------


def _check_sorted(times):
    times = [float(t) for t in times]
    if any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    if any(b < a for a, b in zip(times, times[1:])):
        raise UnsortedTimes(f"times {times} are not nondecreasing")
    return times


@dataclass(frozen=True, eq=False)
class WChain:
    """Legs ``w_1..w_k`` of the joint-survival recursion (index 0 is ``w_1``).

    Leg ``i`` runs over ``[0, t_i - t_{i-1}]`` with the censoring set
    ``C_i = A_i u ... u A_k``.
    """

    times: tuple[float, ...]
    unions: tuple[JumpSet, ...]
    legs: tuple[FlowSolution, ...]
    durations: tuple[float, ...]
    nu_masses: tuple[float, ...]

    def w(self, i: int, t: float) -> float:
        """``w_i(t)`` with 1-based ``i``."""
        return self.legs[i - 1].value(t)

    def immigration_terms(self) -> list[float]:
        """``int_0^{t_i - t_{i-1}} (psi^(C_i)(w_i) + nu(C_i)) du`` per leg."""
        return [
            leg.final_psi + nu * dur
            for leg, nu, dur in zip(self.legs, self.nu_masses, self.durations)
        ]


def w_chain(
    p: CbiParams,
    sets: Sequence[JumpSet],
    times: Sequence[float],
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> WChain:
    if p.d != 1:
        raise ValueError("the w-chain is single-type")
    if len(sets) != len(times) or not sets:
        raise ValueError("need one time per set")
    times = _check_sorted(times)
    for A in sets:
        _require_finite(p, A)
    k = len(sets)
    unions = [union_of(sets[i:]) for i in range(k)]
    durations = [times[0]] + [times[i] - times[i - 1] for i in range(1, k)]
    legs: list[FlowSolution] = [None] * k
    start = 0.0
    for i in range(k - 1, -1, -1):
        legs[i] = flow_v_set(p, unions[i], start, durations[i], cfg)
        start = legs[i].value(durations[i])
    nu_masses = tuple(p.nu.mass(C) for C in unions)
    return WChain(tuple(times), tuple(unions), tuple(legs), tuple(durations), nu_masses)


@dataclass(frozen=True, eq=False)
class YChain:
    """Effective Laplace arguments ``y_1..y_k`` and their flows (index 0 is ``y_1``)."""

    times: tuple[float, ...]
    ys: tuple[np.ndarray, ...]
    legs: tuple[FlowSolution, ...]
    durations: tuple[float, ...]


def y_chain(
    p: CbiParams,
    times: Sequence[float],
    lams: Sequence,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> YChain:
    if len(times) != len(lams) or not len(times):
        raise ValueError("need one lam per time")
    times = _check_sorted(times)
    lams = [np.atleast_1d(np.asarray(l, dtype=float)) for l in lams]
    k = len(times)
    durations = [times[0]] + [times[i] - times[i - 1] for i in range(1, k)]
    ys: list[np.ndarray] = [None] * k
    legs: list[FlowSolution] = [None] * k
    carry = np.zeros(p.d)
    for i in range(k - 1, -1, -1):
        ys[i] = lams[i] + carry
        legs[i] = flow_v(p, ys[i], durations[i], cfg)
        carry = legs[i].final
    return YChain(tuple(times), tuple(ys), tuple(legs), tuple(durations))


# Gauss-Legendre nodes for integrating phi along dense-output steps
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


class GFunction:
    """Piecewise function ``g`` on ``[0, t_k]`` built from the y-chain."""

    def __init__(self, p: CbiParams, chain: YChain, lams):
        self.p = p
        self.chain = chain
        self.times = chain.times
        self.lams = [float(np.atleast_1d(l)[0]) for l in lams]
        self._cum = [self._cumulative(leg) for leg in chain.legs]

    def _leg_index(self, s: float) -> int:
        if s < 0 or s > self.times[-1]:
            raise ValueError(f"s={s} outside [0, {self.times[-1]}]")
        for i, ti in enumerate(self.times):
            if s <= ti:
                return i
        return len(self.times) - 1

    def __call__(self, s):
        if np.ndim(s):
            return np.array([self(float(x)) for x in s])
        i = self._leg_index(float(s))
        return self.chain.legs[i].value(self.times[i] - s)

    def right_limit(self, s: float) -> float:
        """``lim_{u -> s+} g(u)`` for ``s`` in ``[0, t_k)``."""
        for i, ti in enumerate(self.times):
            if s < ti:
                return self.chain.legs[i].value(ti - s)
        raise ValueError("no right limit at t_k")

    def _phi_along(self, leg: FlowSolution, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        xs = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
        vals = [float(phi(self.p, max(v, 0.0))[0]) for v in leg.state(xs)[:, 0]]
        return 0.5 * (b - a) * float(np.dot(_GL_W, vals))

    def _cumulative(self, leg: FlowSolution):
        nodes = leg.t_nodes
        cum = [0.0]
        for a, b in zip(nodes[:-1], nodes[1:]):
            cum.append(cum[-1] + self._phi_along(leg, a, b))
        return nodes, np.array(cum)

    def _leg_integral(self, i: int, r: float) -> float:
        # int_0^r phi(v(rho, y_i)) d rho by per-step Gauss-Legendre
        nodes, cum = self._cum[i]
        if r <= 0:
            return 0.0
        j = int(np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, len(nodes) - 1))
        return cum[j] + self._phi_along(self.chain.legs[i], nodes[j], r)

    def phi_integral(self, s: float) -> float:
        """``int_s^{t_k} phi(g(u)) du``."""
        total = 0.0
        prev = 0.0
        for i, ti in enumerate(self.times):
            lo = max(s, prev)
            if lo < ti:
                # on (t_{i-1}, t_i], g(u) = v(t_i - u, y_i)
                total += self._leg_integral(i, ti - lo)
            prev = ti
        return total

    def residual(self, grid) -> np.ndarray:
        """``|g(s) + int_s^{t_k} phi(g) du - sum_i lam_i 1{s <= t_i}|`` on a grid."""
        out = []
        for s in np.asarray(grid, dtype=float):
            target = sum(l for l, ti in zip(self.lams, self.times) if s <= ti)
            out.append(abs(self(s) + self.phi_integral(s) - target))
        return np.array(out)


def g_piecewise(
    p: CbiParams,
    times: Sequence[float],
    lams: Sequence[float],
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> GFunction:
    if p.d != 1:
        raise ValueError("g_piecewise is single-type")
    times = [float(t) for t in times]
    if times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise UnsortedTimes("g_piecewise needs 0 < t_1 < ... < t_k")
    chain = y_chain(p, times, [[l] for l in lams], cfg)
    return GFunction(p, chain, lams)
