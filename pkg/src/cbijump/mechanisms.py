"""Branching and immigration mechanisms.

Every function here is pure.  The joint mechanisms of (X, J(A_1), ...,
J(A_k)) are evaluated by splitting the Levy measures over the 2**k sign cells
of the sets, so each cell integral is an exponential kernel times the
constant ``exp(-sum_i lam_i 1{cell in A_i})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measures import FULL, JumpSet, LevyMeasure, VectorMeasure
from .params import (
    MAX_LIFT_SETS,
    CbiParams,
    _require_finite,
    restrict_for_jumps,
    sign_cells,
)


# ---------------------------------------------------------------------------
# multi-type helpers
# ---------------------------------------------------------------------------


def _piece_branching(comp, off, lam, i):
    """int (e^{-<lam,z>} - 1 + lam_i (1 ^ z_i)) over one lifted piece."""
    shift = float(np.dot(lam[1:], off[1:]))
    if i == 0:
        if shift == 0.0:
            return comp.integrate("compensated", FULL, lam[0])
        decay = math.exp(-shift)
        return (
            decay * comp.integrate("compensated", FULL, lam[0])
            + (1.0 - decay) * lam[0] * comp.integrate("min1")
            - (1.0 - decay) * comp.integrate("one")
        )
    # z_i = off[i] is constant over the piece
    mass = comp.integrate("one")
    return (
        math.exp(-shift) * comp.integrate("exp", FULL, lam[0])
        - mass
        + lam[i] * min(1.0, off[i]) * mass
    )


def _piece_immigration(comp, off, lam):
    shift = float(np.dot(lam[1:], off[1:]))
    if shift == 0.0:
        return comp.integrate("one_minus_exp", FULL, lam[0])
    decay = math.exp(-shift)
    return decay * comp.integrate("one_minus_exp", FULL, lam[0]) + (1.0 - decay) * comp.integrate(
        "one"
    )


def _vector_branching_integral(m: VectorMeasure, lam: np.ndarray, i: int) -> float:
    vals = [
        w * (math.expm1(-float(np.dot(lam, loc))) + lam[i] * min(1.0, loc[i]))
        for loc, w in m.atoms
    ]
    vals.extend(_piece_branching(c, o, lam, i) for c, o in m.pieces)
    return math.fsum(vals)


def _vector_immigration_integral(m: VectorMeasure, lam: np.ndarray) -> float:
    vals = [-w * math.expm1(-float(np.dot(lam, loc))) for loc, w in m.atoms]
    vals.extend(_piece_immigration(c, o, lam) for c, o in m.pieces)
    return math.fsum(vals)


# ---------------------------------------------------------------------------
# public mechanisms
# ---------------------------------------------------------------------------


def phi(p: CbiParams, lam) -> np.ndarray:
    """Branching mechanism, a d-vector."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if p.d == 1:
        l0 = float(lam[0])
        val = p.c0 * l0 * l0 - p.B0 * l0 + p.mu0.integrate("compensated", FULL, l0)
        return np.array([val])
    out = np.empty(p.d)
    linear = p.B.T @ lam
    for i in range(p.d):
        out[i] = (
            p.c[i] * lam[i] * lam[i]
            - linear[i]
            + _vector_branching_integral(p.mu[i], lam, i)
        )
    return out


def psi(p: CbiParams, lam) -> float:
    """Immigration mechanism."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if p.d == 1:
        l0 = float(lam[0])
        return p.beta0 * l0 + p.nu.integrate("one_minus_exp", FULL, l0)
    return float(p.beta @ lam) + _vector_immigration_integral(p.nu, lam)


def phi_restricted(p: CbiParams, A, lam):
    """Branching mechanism of the process with A-jumps censored.

    Scalar for ``d == 1``, a d-vector otherwise.
    """
    r = restrict_for_jumps(p, A)
    out = phi(r, lam)
    return float(out[0]) if p.d == 1 else out


def psi_restricted(p: CbiParams, A, lam) -> float:
    return psi(restrict_for_jumps(p, A), lam)


# ---------------------------------------------------------------------------
# joint mechanisms of the state and the jump counters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    counters: tuple[int, ...]
    mu: LevyMeasure
    nu: LevyMeasure


class JointCells:
    """Sign-cell decomposition of mu and nu for sets A_1..A_k (d = 1).

    Built once and reused by ODE right-hand sides.
    """

    def __init__(self, p: CbiParams, sets: Sequence[JumpSet], max_sets: int = MAX_LIFT_SETS):
        if p.d != 1:
            raise ValueError("joint mechanisms are single-type")
        if len(sets) > max_sets:
            raise ValueError(f"at most {max_sets} sets are supported")
        for A in sets:
            _require_finite(p, A)
        self.p = p
        self.k = len(sets)
        self.cells = [
            Cell(bits, p.mu0.restrict(cell), p.nu.restrict(cell))
            for bits, cell in sign_cells(list(sets))
        ]
        self._finite = {}
        for cell in self.cells:
            if any(cell.counters):
                # marked cells have finite mass, cache the lam-free integrals
                self._finite[cell.counters] = (
                    cell.mu.integrate("one"),
                    cell.mu.integrate("min1"),
                    cell.nu.integrate("one"),
                )

    def phi(self, lam0: float, lam: Sequence[float]) -> float:
        p = self.p
        lam0 = float(lam0)
        vals = [p.c0 * lam0 * lam0, -p.B0 * lam0]
        for cell in self.cells:
            if cell.mu.is_zero():
                continue
            shift = math.fsum(l for l, b in zip(lam, cell.counters) if b)
            comp = cell.mu.integrate("compensated", FULL, lam0)
            if shift == 0.0:
                vals.append(comp)
                continue
            mass, min1, _ = self._finite[cell.counters]
            keep = -math.expm1(-shift)
            vals.append(math.exp(-shift) * comp + keep * (lam0 * min1 - mass))
        return math.fsum(vals)

    def psi(self, lam0: float, lam: Sequence[float]) -> float:
        p = self.p
        lam0 = float(lam0)
        vals = [p.beta0 * lam0]
        for cell in self.cells:
            if cell.nu.is_zero():
                continue
            shift = math.fsum(l for l, b in zip(lam, cell.counters) if b)
            base = cell.nu.integrate("one_minus_exp", FULL, lam0)
            if shift == 0.0:
                vals.append(base)
                continue
            mass = self._finite[cell.counters][2]
            vals.append(math.exp(-shift) * base - math.expm1(-shift) * mass)
        return math.fsum(vals)


def phi_joint(p: CbiParams, sets: Sequence[JumpSet], lam0: float, lam: Sequence[float]) -> float:
    """First coordinate of the branching mechanism of (X, J(A_1), ..., J(A_k))."""
    return JointCells(p, sets).phi(lam0, lam)


def psi_joint(p: CbiParams, sets: Sequence[JumpSet], lam0: float, lam: Sequence[float]) -> float:
    """Immigration mechanism of (X, J(A_1), ..., J(A_k))."""
    return JointCells(p, sets).psi(lam0, lam)


def union_of(sets: Sequence[JumpSet]) -> JumpSet:
    out = JumpSet.empty()
    for s in sets:
        out = out | s
    return out
