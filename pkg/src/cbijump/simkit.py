"""Path simulation of single-type CBI processes and Monte Carlo estimators.

Two schemes are provided:

``exact``
    For ``c = 0`` and finite-activity measures.  Between jumps the state
    follows the affine flow ``x' = beta + (B - int (1 ^ z) mu(dz)) x``;
    branching jumps (intensity ``X_u mu(U_1)``) and immigration jumps (rate
    ``nu(U_1)``) are generated by thinning against the endpoint maximum of the
    intensity over a window.

``euler``
    Euler-Maruyama on the drift ``beta + B~ X`` and the diffusion
    ``sqrt(2 c max(0, X))``, with jumps larger than ``eps_trunc`` simulated
    and their compensator subtracted; compensated small jumps are dropped.
    Vectorised over paths.

Randomness is counter based: path ``i`` of the exact scheme draws from
``Philox(key=(seed, i))``; the Euler scheme draws chunk ``j`` of
``EULER_CHUNK`` paths from ``Philox(key=(seed, 2**63 + j))``.  Estimates are
therefore independent of the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import PreconditionViolated
from .measures import FULL, INF, JumpSet, LevyMeasure
from .params import CbiParams, effective_linear, validate

EULER_CHUNK = 4096
DEFAULT_Z = 3.0
WORKERS_ENV = "CBI_WORKERS"


class Jump(NamedTuple):
    time: float
    size: float
    origin: str  # "branching" | "immigration"


@dataclass(frozen=True, eq=False)
class PathRecord:
    times: np.ndarray
    states: np.ndarray
    left_states: np.ndarray
    jumps: tuple[Jump, ...]
    horizon: float
    scheme: str
    dt: float | None = None
    eps_trunc: float | None = None

    @property
    def final_state(self) -> float:
        return float(self.states[-1])

    def state_at(self, t: float) -> float:
        """Right-continuous state at ``t`` (exact scheme: piecewise flow not stored,
        returns the value at the last recorded time <= t)."""
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        return float(self.states[max(i, 0)])

    def to_csv(self, path_csv, jumps_csv):
        import csv

        with open(path_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "X_t"])
            for t, x in zip(self.times, self.states):
                w.writerow([repr(float(t)), repr(float(x))])
        with open(jumps_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "z", "origin"])
            for j in self.jumps:
                w.writerow([repr(j.time), repr(j.size), j.origin])


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one path (or one Euler chunk)."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(index)))


# ---------------------------------------------------------------------------
# exact scheme
# ---------------------------------------------------------------------------


def _affine_flow(x0: float, a: float, b: float, s: float) -> float:
    if b == 0.0:
        return x0 + a * s
    bs = b * s
    return x0 * math.exp(bs) + a * math.expm1(bs) / b


class _ExactSetup:
    def __init__(self, p: CbiParams):
        if p.d != 1:
            raise PreconditionViolated("exact scheme is single-type")
        if p.c0 != 0.0:
            raise PreconditionViolated("exact scheme needs c = 0")
        rep = validate(p)
        if not rep.admissible:
            raise PreconditionViolated(f"inadmissible parameters: {rep.failures()}")
        if not rep.first_moment_ok:
            raise PreconditionViolated("first-moment condition fails")
        self.m_mu = p.mu0.mass()
        self.m_nu = p.nu.mass()
        if not (math.isfinite(self.m_mu) and math.isfinite(self.m_nu)):
            raise PreconditionViolated("exact scheme needs finite-activity measures")
        self.a = p.beta0
        self.b = p.B0 - p.mu0.integrate("min1")
        self.mu_s = p.mu0.sampler() if self.m_mu > 0 else None
        self.nu_s = p.nu.sampler() if self.m_nu > 0 else None


def _exact_path(setup: _ExactSetup, x: float, T: float, rng, record: bool = True, stop=None):
    """Simulate on ``[0, T]``; ``stop(u, z)`` returning True ends the path after that jump."""
    a, b, m_mu, m_nu = setup.a, setup.b, setup.m_mu, setup.m_nu
    u = 0.0
    X = float(x)
    jumps = []
    times = [0.0]
    states = [X]
    lefts = [X]
    while u < T:
        width = T - u
        if b > 0:
            width = min(width, 1.0 / b)
        e = u + width
        X_e = _affine_flow(X, a, b, e - u)
        bound = (max(X, X_e) * m_mu + m_nu) * 1.0001
        if bound <= 0.0:
            X, u = X_e, e
            continue
        s = u + rng.exponential(1.0 / bound)
        if s >= e:
            X, u = X_e, e
            continue
        X_s = _affine_flow(X, a, b, s - u)
        branch_rate = X_s * m_mu
        rate = branch_rate + m_nu
        u = s
        X = X_s
        if rng.random() * bound >= rate:
            continue
        if rng.random() * rate < branch_rate:
            z = setup.mu_s.draw(rng)
            origin = "branching"
        else:
            z = setup.nu_s.draw(rng)
            origin = "immigration"
        jumps.append(Jump(s, z, origin))
        if record:
            times.append(s)
            lefts.append(X)
            states.append(X + z)
        X += z
        if stop is not None and stop(s, z):
            return X, jumps, times, states, lefts
    times.append(T)
    lefts.append(X)
    states.append(X)
    return X, jumps, times, states, lefts


def simulate_exact_jump(p: CbiParams, x: float, T: float, rng, stop_on: JumpSet | None = None) -> PathRecord:
    """Exact path on ``[0, T]``.

    With ``stop_on`` the path ends at the first jump whose size lies in that
    set; the record's horizon is then the stopping time.
    """
    setup = _ExactSetup(p)
    stop = None if stop_on is None else (lambda u, z: stop_on.contains(z))
    X, jumps, times, states, lefts = _exact_path(setup, x, float(T), rng, stop=stop)
    horizon = float(times[-1]) if stop is not None and times[-1] < T and jumps else float(T)
    return PathRecord(
        np.array(times), np.array(states), np.array(lefts), tuple(jumps), horizon, "exact"
    )


def exact_paths(p: CbiParams, x: float, T: float, seed: int, n: int, stop_on: JumpSet | None = None):
    """Iterate over ``n`` exact paths; path ``i`` uses the stream ``(seed, i)``."""
    setup = _ExactSetup(p)
    stop = None if stop_on is None else (lambda u, z: stop_on.contains(z))
    for i in range(n):
        X, jumps, times, states, lefts = _exact_path(setup, x, float(T), path_rng(seed, i), stop=stop)
        horizon = float(times[-1]) if stop is not None and times[-1] < T and jumps else float(T)
        yield PathRecord(np.array(times), np.array(states), np.array(lefts), tuple(jumps), horizon, "exact")


# ---------------------------------------------------------------------------
# Euler scheme
# ---------------------------------------------------------------------------


class _EulerSetup:
    def __init__(self, p: CbiParams, dt: float, eps: float):
        if p.d != 1:
            raise PreconditionViolated("Euler scheme is single-type")
        if not dt > 0:
            raise PreconditionViolated("dt must be positive")
        if eps < 0:
            raise PreconditionViolated("eps_trunc must be nonnegative")
        rep = validate(p)
        if not rep.ok:
            raise PreconditionViolated(f"parameters fail: {rep.failures()}")
        big = JumpSet.of((eps, INF)) if eps > 0 else FULL
        small = JumpSet.of((0.0, eps)) if eps > 0 else JumpSet.empty()
        self.dt = dt
        self.eps = eps
        self.c = p.c0
        self.beta = p.beta0
        mu_big = p.mu0.restrict(big)
        nu_big = p.nu.restrict(big)
        self.m_mu = mu_big.mass()
        self.m_nu = nu_big.mass()
        if not (math.isfinite(self.m_mu) and math.isfinite(self.m_nu)):
            raise PreconditionViolated("infinite-activity measure needs eps_trunc > 0")
        lin = effective_linear(p)
        # simulated branching jumps are compensated in the drift
        self.slope = float(lin.B_tilde[0, 0]) - mu_big.integrate("z")
        # immigration jumps are not compensated; small ones enter as their mean
        self.intercept = self.beta + (p.nu.integrate("z", small) if eps > 0 else 0.0)
        self.mu_s = mu_big.sampler() if self.m_mu > 0 else None
        self.nu_s = nu_big.sampler() if self.m_nu > 0 else None
        self.small_second_moment = p.mu0.integrate("z2", small) if eps > 0 else 0.0


def _euler_batch(setup: _EulerSetup, x: float, T: float, rng, n: int, record: bool = False):
    """Simulate ``n`` paths; returns final states, jump table and optional grid."""
    dt = setup.dt
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    X = np.full(n, float(x))
    grid = [X.copy()] if record else None
    tab_path, tab_time, tab_size, tab_origin = [], [], [], []
    sq = math.sqrt(2.0 * setup.c)
    t = 0.0
    for k in range(steps):
        h = min(dt, T - t)
        if h <= 0:
            break
        Xp = np.maximum(X, 0.0)
        incr = (setup.intercept + setup.slope * X) * h
        if setup.c > 0:
            incr += sq * np.sqrt(Xp) * rng.standard_normal(n) * math.sqrt(h)
        for rate_vec, sampler, origin in (
            (Xp * setup.m_mu, setup.mu_s, 0),
            (None, setup.nu_s, 1),
        ):
            if sampler is None:
                continue
            lam = rate_vec * h if rate_vec is not None else np.full(n, setup.m_nu * h)
            counts = rng.poisson(lam)
            total = int(counts.sum())
            if total == 0:
                continue
            who = np.repeat(np.arange(n), counts)
            sizes = sampler.draw(rng, total)
            when = t + h * rng.random(total)
            np.add.at(incr, who, sizes)
            tab_path.append(who)
            tab_time.append(when)
            tab_size.append(sizes)
            tab_origin.append(np.full(total, origin, dtype=np.int8))
        X = np.maximum(X + incr, 0.0)
        t = T if k == steps - 1 else t + h
        if record:
            grid.append(X.copy())
    if tab_path:
        table = (
            np.concatenate(tab_path),
            np.concatenate(tab_time),
            np.concatenate(tab_size),
            np.concatenate(tab_origin),
        )
        order = np.lexsort((table[1], table[0]))
        table = tuple(col[order] for col in table)
    else:
        table = (np.zeros(0, int), np.zeros(0), np.zeros(0), np.zeros(0, np.int8))
    times = np.minimum(np.arange(steps + 1) * dt, T) if record else None
    return X, table, times, (np.array(grid) if record else None)


def simulate_euler(p: CbiParams, x: float, T: float, dt: float, eps_trunc: float, rng) -> PathRecord:
    setup = _EulerSetup(p, dt, eps_trunc)
    X, table, times, grid = _euler_batch(setup, x, float(T), rng, 1, record=True)
    origins = ("branching", "immigration")
    jumps = tuple(Jump(float(u), float(z), origins[o]) for u, z, o in zip(table[1], table[2], table[3]))
    states = grid[:, 0]
    return PathRecord(times, states, states.copy(), jumps, float(T), "euler", dt, eps_trunc)


def euler_terminal_states(
    p: CbiParams, x: float, T: float, dt: float, eps_trunc: float, rng, n: int
) -> np.ndarray:
    """``X_T`` of ``n`` independent Euler paths."""
    setup = _EulerSetup(p, dt, eps_trunc)
    return _euler_batch(setup, x, float(T), rng, n)[0]


def euler_bias_budget(p: CbiParams, x: float, T: float, eps_trunc: float) -> float:
    """L2 size of the dropped small compensated jumps, ``sqrt(T E[X] int_{z<=eps} z^2 mu)``,
    with ``E[X]`` bounded by its maximum over ``[0, T]``."""
    if eps_trunc <= 0:
        return 0.0
    lin = effective_linear(p)
    b, a = float(lin.B_tilde[0, 0]), float(lin.beta_tilde[0])
    grid = np.linspace(0.0, T, 65)
    mean_max = max(_affine_flow(x, a, b, s) for s in grid)
    return math.sqrt(T * mean_max * p.mu0.integrate("z2", JumpSet.of((0.0, eps_trunc))))


# ---------------------------------------------------------------------------
# jump statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpStatistics:
    sets: tuple[JumpSet, ...]
    jump_times: tuple[tuple[float, ...], ...]
    horizon: float

    @property
    def first_times(self) -> tuple[float, ...]:
        return tuple(ts[0] if ts else INF for ts in self.jump_times)

    @property
    def censored(self) -> tuple[bool, ...]:
        return tuple(not ts for ts in self.jump_times)

    def count(self, i: int, t: float | None = None) -> int:
        """``J_t(A_i)``, the number of marked jumps in ``(0, t]``."""
        t = self.horizon if t is None else t
        return int(np.searchsorted(self.jump_times[i], t, side="right"))


def jump_statistics(path: PathRecord, sets: Sequence[JumpSet]) -> JumpStatistics:
    per_set = []
    for A in sets:
        per_set.append(tuple(j.time for j in path.jumps if A.contains(j.size)))
    return JumpStatistics(tuple(sets), tuple(per_set), path.horizon)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalQuery:
    """Event ``{tau_{A_1} > t_1, ..., tau_{A_k} > t_k}``."""

    pairs: tuple[tuple[JumpSet, float], ...]

    @property
    def horizon(self) -> float:
        return max(t for _, t in self.pairs)


@dataclass(frozen=True)
class LaplaceQuery:
    """Functional ``exp(-lam0 X_t - sum_i lam_i J_t(A_i))``."""

    t: float
    lam0: float
    sets: tuple[JumpSet, ...] = ()
    lams: tuple[float, ...] = ()

    @property
    def horizon(self) -> float:
        return self.t


@dataclass(frozen=True)
class McEstimate:
    n: int
    mean: float
    std: float
    half_width: float
    z: float
    seed: int
    scheme: str

    @property
    def level(self) -> float:
        return float(2 * stats.norm.cdf(self.z) - 1)

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "half_width": self.half_width,
            "z": self.z,
            "level": self.level,
            "seed": self.seed,
            "scheme": self.scheme,
        }


def _survival_value(query: SurvivalQuery, jumps) -> float:
    for A, t in query.pairs:
        for j in jumps:
            if j.time > t:
                break
            if A.contains(j.size):
                return 0.0
    return 1.0


def _laplace_value(query: LaplaceQuery, final_state: float, jumps) -> float:
    expo = query.lam0 * final_state
    for A, lam in zip(query.sets, query.lams):
        if lam:
            expo += lam * sum(1 for j in jumps if j.time <= query.t and A.contains(j.size))
    return math.exp(-expo)


def _exact_chunk(args):
    kind, p, x, query, seed, start, stop = args
    setup = _ExactSetup(p)
    T = query.horizon
    out = np.empty(stop - start)
    halt = None
    if kind == "joint_survival":
        # once an indicator has failed the rest of the path is irrelevant
        halt = lambda u, z: any(u <= t and A.contains(z) for A, t in query.pairs)
    for n, i in enumerate(range(start, stop)):
        rng = path_rng(seed, i)
        X, jumps, *_ = _exact_path(setup, x, T, rng, record=False, stop=halt)
        if kind == "joint_survival":
            out[n] = _survival_value(query, jumps)
        else:
            out[n] = _laplace_value(query, X, jumps)
    return out


def _euler_chunk(args):
    kind, p, x, query, seed, chunk, size, dt, eps = args
    setup = _EulerSetup(p, dt, eps)
    rng = path_rng(seed, 2**63 + chunk)
    X, (who, when, sizes, _), _, _ = _euler_batch(setup, x, query.horizon, rng, size)
    if kind == "joint_survival":
        alive = np.ones(size, dtype=bool)
        for A, t in query.pairs:
            hit = (when <= t) & A.contains(sizes)
            alive[who[hit]] = False
        return alive.astype(float)
    expo = query.lam0 * X
    for A, lam in zip(query.sets, query.lams):
        hit = (when <= query.t) & A.contains(sizes)
        expo += lam * np.bincount(who[hit], minlength=size)
    return np.exp(-expo)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def _run(fn, tasks, workers):
    if workers == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def mc_estimate(
    kind: str,
    p: CbiParams,
    x: float,
    query,
    n: int,
    seed: int,
    scheme: str = "exact",
    dt: float = 1e-3,
    eps_trunc: float = 0.0,
    workers: int | None = None,
    z: float = DEFAULT_Z,
) -> McEstimate:
    """Monte Carlo estimate of a joint survival probability or Laplace functional.

    The reduction is a compensated sum over per-path values in path order, so
    the result does not depend on ``workers``.
    """
    if n < 100:
        raise ValueError("n must be at least 100")
    if kind == "joint_survival" and not isinstance(query, SurvivalQuery):
        raise TypeError("joint_survival needs a SurvivalQuery")
    if kind == "laplace" and not isinstance(query, LaplaceQuery):
        raise TypeError("laplace needs a LaplaceQuery")
    if kind not in ("joint_survival", "laplace"):
        raise ValueError(f"unknown estimator kind {kind!r}")
    workers = resolve_workers(workers)
    if scheme == "exact":
        _ExactSetup(p)  # fail fast in the parent process
        n_tasks = max(workers, 1) * 4 if workers > 1 else 1
        bounds = np.linspace(0, n, n_tasks + 1).astype(int)
        tasks = [
            (kind, p, x, query, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a
        ]
        parts = _run(_exact_chunk, tasks, workers)
    elif scheme == "euler":
        _EulerSetup(p, dt, eps_trunc)
        chunks = [(j, min(EULER_CHUNK, n - j * EULER_CHUNK)) for j in range(-(-n // EULER_CHUNK))]
        tasks = [(kind, p, x, query, seed, j, size, dt, eps_trunc) for j, size in chunks]
        parts = _run(_euler_chunk, tasks, workers)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    values = np.concatenate(parts)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((values - mean) ** 2) / (n - 1))
    return McEstimate(n, mean, std, z * std / math.sqrt(n), z, seed, scheme)
