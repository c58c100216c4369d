"""Survival functions of first jump times and joint Laplace transforms.

Every law returns a :class:`LawValue` whose canonical field is the log of the
probability (or Laplace transform); the plain value is derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MomentConditionViolated
from .mechanisms import JointCells, union_of
from .measures import JumpSet
from .odeflow import (
    DEFAULT_CONFIG,
    SolverConfig,
    flow_v,
    flow_v_joint,
    flow_v_marked,
    w_chain,
    y_chain,
)
from .params import CbiParams, _require_finite, validate


@dataclass(frozen=True)
class LawValue:
    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    def __float__(self):
        return self.value


def _x_vec(p: CbiParams, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape == (1,) and p.d > 1:
        x = np.full(p.d, x[0])
    if x.shape != (p.d,) or np.any(x < 0):
        raise ValueError(f"x must be a nonnegative {p.d}-vector")
    return x


def _need_first_moment(p: CbiParams):
    if not validate(p).first_moment_ok:
        raise MomentConditionViolated("int |r| 1{|r|>=1} nu(dr) is infinite")


def laplace_single_time(p: CbiParams, x, t: float, lam, cfg: SolverConfig = DEFAULT_CONFIG) -> LawValue:
    """``E_x exp(-<lam, X_t>)``."""
    x = _x_vec(p, x)
    sol = flow_v(p, lam, t, cfg)
    return LawValue(-float(x @ sol.final) - sol.final_psi)


def laplace_multi_time(
    p: CbiParams, x, pairs: Sequence[tuple[float, object]], cfg: SolverConfig = DEFAULT_CONFIG
) -> LawValue:
    """``E_x exp(-sum_i <lam_i, X_{t_i}>)`` for pairs ``(t_i, lam_i)`` in any order."""
    x = _x_vec(p, x)
    order = sorted(range(len(pairs)), key=lambda i: float(pairs[i][0]))
    times = [float(pairs[i][0]) for i in order]
    lams = [pairs[i][1] for i in order]
    chain = y_chain(p, times, lams, cfg)
    log = -float(x @ chain.legs[0].final) - math.fsum(leg.final_psi for leg in chain.legs)
    return LawValue(log)


def laplace_state_and_counts(
    p: CbiParams,
    x: float,
    t: float,
    lam0: float,
    sets: Sequence[JumpSet],
    lam: Sequence[float],
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> LawValue:
    """``E_x exp(-lam0 X_t - sum_i lam_i J_t(A_i))`` (single type)."""
    x = float(_x_vec(p, x)[0])
    cells = JointCells(p, sets)
    sol = flow_v_joint(p, sets, lam0, lam, t, cfg, cells=cells)
    return LawValue(-x * sol.value(t) - sol.final_psi)


def survival_first_jump(p: CbiParams, x, t: float, A, cfg: SolverConfig = DEFAULT_CONFIG) -> LawValue:
    """``P_x(tau_A > t)``; any dimension, ``A`` a JumpSet (d=1) or BoxSet."""
    _need_first_moment(p)
    _require_finite(p, A)
    x = _x_vec(p, x)
    sol = flow_v_marked(p, A, t, cfg)
    log = -p.nu.mass(A) * t - float(x @ sol.final) - sol.final_psi
    return LawValue(log)


def survival_joint(
    p: CbiParams,
    x: float,
    pairs: Sequence[tuple[JumpSet, float]],
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> LawValue:
    """``P_x(tau_{A_1} > t_1, ..., tau_{A_k} > t_k)`` for pairs in any time order."""
    if p.d != 1:
        raise ValueError("joint survival is single-type")
    _need_first_moment(p)
    x = float(_x_vec(p, x)[0])
    ordered = sorted(pairs, key=lambda pr: float(pr[1]))
    sets = [A for A, _ in ordered]
    times = [float(t) for _, t in ordered]
    chain = w_chain(p, sets, times, cfg)
    log = -x * chain.legs[0].final[0] - math.fsum(chain.immigration_terms())
    return LawValue(log)


def survival_same_time(
    p: CbiParams, x: float, t: float, sets: Sequence[JumpSet], cfg: SolverConfig = DEFAULT_CONFIG
) -> LawValue:
    """``P_x(tau_{A_1} > t, ..., tau_{A_k} > t)``: first jump into the union."""
    if p.d != 1:
        raise ValueError("use survival_first_jump for multi-type parameters")
    return survival_first_jump(p, x, t, union_of(sets), cfg)
