"""Interval sets on (0, inf) and Levy measures with exact kernel integrals.

Sets are finite unions of half-open intervals ``(a, b]``; ``b`` may be
``inf``.  Measures are finite sums of three component families (atoms,
exponential densities, tempered power laws), each optionally restricted to a
:class:`JumpSet` support, so every kernel used by the mechanisms has a closed
form.

Multi-type measures (:class:`VectorMeasure`) live on ``R_+^d \\ {0}`` and hold
vector atoms plus *pieces*: a scalar component pushed forward along the first
coordinate and shifted by a constant offset.  Pieces are what counter lifting
produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import special

from .errors import DivergentIntegral, ZeroMass

INF = math.inf

QUAD_EPSREL = 1e-10

KERNELS = (
    "one",
    "z",
    "z2",
    "z_min_z2",
    "min1",
    "excess1",
    "z_gt1",
    "exp",
    "one_minus_exp",
    "compensated",
)
LAMBDA_KERNELS = frozenset({"exp", "one_minus_exp", "compensated"})


# ---------------------------------------------------------------------------
# interval sets
# ---------------------------------------------------------------------------


def _coerce_bound(value) -> float:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("inf", "+inf", "infinity"):
            return INF
        if key in ("-inf", "-infinity"):
            return -INF
        raise ValueError(f"bad interval bound {value!r}")
    return float(value)


@dataclass(frozen=True)
class JumpSet:
    """Finite union of disjoint half-open intervals ``(a, b]`` in (0, inf).

    The constructor sorts and merges overlapping or adjacent intervals, so two
    sets with the same indicator compare equal.
    """

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pairs = []
        for pair in self.intervals:
            a, b = (_coerce_bound(v) for v in pair)
            if math.isnan(a) or math.isnan(b):
                raise ValueError("interval bounds must not be NaN")
            if a < 0:
                raise ValueError(f"interval ({a}, {b}] leaves (0, inf)")
            if a == INF or not a < b:
                raise ValueError(f"interval ({a}, {b}] is empty or reversed")
            pairs.append((a, b))
        pairs.sort()
        merged: list[tuple[float, float]] = []
        for a, b in pairs:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def of(cls, *pairs) -> "JumpSet":
        return cls(tuple(pairs))

    @classmethod
    def empty(cls) -> "JumpSet":
        return cls(())

    @classmethod
    def full(cls) -> "JumpSet":
        return cls(((0.0, INF),))

    def __bool__(self):
        return bool(self.intervals)

    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, z):
        """Exact indicator; accepts scalars or arrays."""
        z_arr = np.asarray(z, dtype=float)
        out = np.zeros(z_arr.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (z_arr > a) & (z_arr <= b)
        if out.ndim == 0:
            return bool(out)
        return out

    __contains__ = contains

    def union(self, other: "JumpSet") -> "JumpSet":
        return JumpSet(self.intervals + other.intervals)

    def intersect(self, other: "JumpSet") -> "JumpSet":
        out = []
        i = j = 0
        x, y = self.intervals, other.intervals
        while i < len(x) and j < len(y):
            a = max(x[i][0], y[j][0])
            b = min(x[i][1], y[j][1])
            if a < b:
                out.append((a, b))
            if x[i][1] < y[j][1]:
                i += 1
            else:
                j += 1
        return JumpSet(tuple(out))

    def complement(self) -> "JumpSet":
        out = []
        left = 0.0
        for a, b in self.intervals:
            if a > left:
                out.append((left, a))
            left = b
        if left < INF:
            out.append((left, INF))
        return JumpSet(tuple(out))

    def difference(self, other: "JumpSet") -> "JumpSet":
        return self.intersect(other.complement())

    __or__ = union
    __and__ = intersect
    __invert__ = complement
    __sub__ = difference

    def clip(self, lo: float, hi: float) -> list[tuple[float, float]]:
        """Intervals of ``self & (lo, hi]`` as raw pairs."""
        out = []
        for a, b in self.intervals:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 < b2:
                out.append((a2, b2))
        return out

    def touches_zero(self) -> bool:
        """True iff 0 lies in the closure of the set."""
        return bool(self.intervals) and self.intervals[0][0] == 0.0

    def to_json(self) -> list:
        return [[a, "inf" if b == INF else b] for a, b in self.intervals]

    def __repr__(self):
        if not self.intervals:
            return "JumpSet(empty)"
        body = " u ".join(f"({a:g},{b:g}]" for a, b in self.intervals)
        return f"JumpSet({body})"


FULL = JumpSet.full()
EMPTY = JumpSet.empty()


def combine_sets(op: str, a: JumpSet, b: JumpSet | None = None) -> JumpSet:
    if op == "complement":
        if b is not None:
            raise ValueError("complement takes a single operand")
        return a.complement()
    if b is None:
        raise ValueError(f"{op} needs two operands")
    if op == "union":
        return a.union(b)
    if op == "intersect":
        return a.intersect(b)
    raise ValueError(f"unknown set operation {op!r}")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

# Each kernel is split at z = 1 into pieces; on each piece it is a linear
# combination of terms coef * z**p * exp(-s z) with s in {0, lam}.
Term = tuple[float, int, float]


def _kernel_pieces(kernel: str, lam: float | None) -> list[tuple[float, float, list[Term]]]:
    if kernel in LAMBDA_KERNELS:
        if lam is None:
            raise ValueError(f"kernel {kernel!r} needs lam")
        lam = float(lam)
        if lam < 0:
            raise ValueError("lam must be nonnegative")
    elif lam is not None:
        raise ValueError(f"kernel {kernel!r} takes no lam")

    if kernel == "one":
        return [(0.0, INF, [(1.0, 0, 0.0)])]
    if kernel == "z":
        return [(0.0, INF, [(1.0, 1, 0.0)])]
    if kernel == "z2":
        return [(0.0, INF, [(1.0, 2, 0.0)])]
    if kernel == "z_min_z2":
        return [(0.0, 1.0, [(1.0, 2, 0.0)]), (1.0, INF, [(1.0, 1, 0.0)])]
    if kernel == "min1":
        return [(0.0, 1.0, [(1.0, 1, 0.0)]), (1.0, INF, [(1.0, 0, 0.0)])]
    if kernel == "excess1":
        return [(1.0, INF, [(1.0, 1, 0.0), (-1.0, 0, 0.0)])]
    if kernel == "z_gt1":
        return [(1.0, INF, [(1.0, 1, 0.0)])]
    if kernel == "exp":
        return [(0.0, INF, [(1.0, 0, lam)])]
    if kernel == "one_minus_exp":
        return [(0.0, INF, [(1.0, 0, 0.0), (-1.0, 0, lam)])]
    if kernel == "compensated":
        return [
            (0.0, 1.0, [(1.0, 0, lam), (-1.0, 0, 0.0), (lam, 1, 0.0)]),
            (1.0, INF, [(1.0, 0, lam), (-1.0, 0, 0.0), (lam, 0, 0.0)]),
        ]
    raise ValueError(f"unknown kernel {kernel!r}")


def kernel_value(kernel: str, z, lam: float | None = None):
    """Pointwise kernel value, used by quadrature oracles and atoms."""
    z = np.asarray(z, dtype=float)
    if kernel == "one":
        return np.ones_like(z)
    if kernel == "z":
        return z
    if kernel == "z2":
        return z * z
    if kernel == "z_min_z2":
        return np.minimum(z, z * z)
    if kernel == "min1":
        return np.minimum(1.0, z)
    if kernel == "excess1":
        return np.maximum(z - 1.0, 0.0)
    if kernel == "z_gt1":
        return np.where(z > 1.0, z, 0.0)
    if kernel == "exp":
        return np.exp(-lam * z)
    if kernel == "one_minus_exp":
        return -np.expm1(-lam * z)
    if kernel == "compensated":
        return np.expm1(-lam * z) + lam * np.minimum(1.0, z)
    raise ValueError(f"unknown kernel {kernel!r}")


def _exp_poly_tail(p: int, q: float, a: float) -> float:
    """Integral of z**p exp(-q z) over (a, inf), q > 0."""
    if a == INF:
        return 0.0
    total = 0.0
    fact_p = math.factorial(p)
    for j in range(p + 1):
        total += fact_p / math.factorial(j) * a**j / q ** (p - j + 1)
    return math.exp(-q * a) * total


def _upper_gamma(s: float, x: float) -> float:
    """Unnormalised upper incomplete gamma, valid for s > -1 (s != 0)."""
    if x == INF:
        return 0.0
    if s > 0:
        return special.gamma(s) * special.gammaincc(s, x)
    if x == 0.0:
        return INF
    return (_upper_gamma(s + 1.0, x) - x**s * math.exp(-x)) / s


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------


class MeasureComponent:
    """Shared machinery for the three component families."""

    support: JumpSet

    def restrict(self, s: JumpSet):
        sub = self.support & s
        if sub.is_empty() or self._empty_on(sub):
            return None
        return self._with_support(sub)

    def _with_support(self, s):
        raise NotImplementedError

    def _empty_on(self, s):
        return False

    def integrate(self, kernel: str, s: JumpSet = FULL, lam: float | None = None) -> float:
        region = self.support & s
        total = 0.0
        for lo, hi, terms in _kernel_pieces(kernel, lam):
            for a, b in region.clip(lo, hi):
                total += self._terms(terms, a, b)
        return total

    def mass(self, s: JumpSet = FULL) -> float:
        return self.integrate("one", s)

    def expect(self, f: Callable[[float], float], s: JumpSet = FULL) -> float:
        """Integral of an arbitrary function by adaptive quadrature."""
        region = self.support & s
        return sum(self._quad(f, a, b) for a, b in region.intervals)

    def _quad(self, f, a, b):
        dens = self.density
        pts = [a]
        for cut in (1.0, 10.0):
            if a < cut < b:
                pts.append(cut)
        pts.append(b)
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, _ = _integrate.quad(
                lambda z: f(z) * dens(z), lo, hi, epsrel=QUAD_EPSREL, epsabs=0.0, limit=200
            )
            total += val
        return total

    def _terms(self, terms, a, b):
        raise NotImplementedError

    def sampler_pieces(self, s: JumpSet):
        """(mass, draw) pairs covering ``support & s``."""
        raise NotImplementedError


@dataclass(frozen=True)
class Atom(MeasureComponent):
    loc: float
    w: float = 1.0
    support: JumpSet = FULL

    def __post_init__(self):
        if not self.loc > 0:
            raise ValueError("atom location must be positive")
        if self.w < 0:
            raise ValueError("atom mass must be nonnegative")

    def _empty_on(self, s):
        return not s.contains(self.loc) or self.w == 0.0

    def _with_support(self, s):
        return Atom(self.loc, self.w, s)

    def integrate(self, kernel, s=FULL, lam=None):
        _kernel_pieces(kernel, lam)  # argument validation
        if not (self.support & s).contains(self.loc):
            return 0.0
        return self.w * float(kernel_value(kernel, self.loc, lam))

    def expect(self, f, s=FULL):
        if not (self.support & s).contains(self.loc):
            return 0.0
        return self.w * f(self.loc)

    def sampler_pieces(self, s):
        if not (self.support & s).contains(self.loc) or self.w == 0:
            return []
        loc = self.loc
        return [(self.w, lambda rng, n: np.full(n, loc))]

    def to_json(self):
        return {"kind": "atom", "params": {"loc": self.loc, "mass": self.w}}


@dataclass(frozen=True)
class ExpDensity(MeasureComponent):
    """Density ``mass * rate * exp(-rate z)``."""

    rate: float
    w: float = 1.0
    support: JumpSet = FULL

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.w < 0:
            raise ValueError("mass must be nonnegative")

    def _with_support(self, s):
        return ExpDensity(self.rate, self.w, s)

    def _empty_on(self, s):
        return self.w == 0.0

    def density(self, z):
        return self.w * self.rate * math.exp(-self.rate * z)

    def _terms(self, terms, a, b):
        th = self.rate
        total = 0.0
        for coef, p, s in terms:
            if coef == 0.0:
                continue
            q = th + s
            total += coef * (_exp_poly_tail(p, q, a) - _exp_poly_tail(p, q, b))
        return self.w * th * total

    def sampler_pieces(self, s):
        out = []
        th = self.rate
        for a, b in (self.support & s).intervals:
            m = self.w * (math.exp(-th * a) - (0.0 if b == INF else math.exp(-th * b)))
            if m <= 0:
                continue
            width = b - a

            def draw(rng, n, a=a, width=width):
                u = rng.random(n)
                frac = 1.0 if width == INF else -math.expm1(-th * width)
                return a - np.log1p(-u * frac) / th

            out.append((m, draw))
        return out

    def to_json(self):
        return {"kind": "exp", "params": {"rate": self.rate, "mass": self.w}}


@dataclass(frozen=True)
class TemperedPowerLaw(MeasureComponent):
    """Density ``scale * z**(-1-alpha) * exp(-tilt z)``, alpha in (0, 1)."""

    alpha: float
    tilt: float
    scale: float = 1.0
    support: JumpSet = FULL

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.tilt > 0:
            raise ValueError("tilt must be positive")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")

    def _with_support(self, s):
        return TemperedPowerLaw(self.alpha, self.tilt, self.scale, s)

    def _empty_on(self, s):
        return self.scale == 0.0

    def density(self, z):
        return self.scale * z ** (-1.0 - self.alpha) * math.exp(-self.tilt * z)

    def _moment(self, p, q, a, b):
        # integral of z**(p-1-alpha) exp(-q z) over (a, b]
        s = p - self.alpha
        return q ** (-s) * (_upper_gamma(s, q * a) - _upper_gamma(s, q * b))

    def _terms(self, terms, a, b):
        if self.scale == 0.0:
            return 0.0
        al, th = self.alpha, self.tilt
        total = 0.0
        singular = []
        for coef, p, s in terms:
            if coef == 0.0:
                continue
            if p == 0 and a == 0.0:
                singular.append((coef, th + s))
            else:
                total += coef * self._moment(p, th + s, a, b)
        if singular:
            csum = sum(c for c, _ in singular)
            if abs(csum) > 1e-14 * max(abs(c) for c, _ in singular):
                if csum > 0:
                    raise DivergentIntegral(
                        f"tempered power law has infinite mass near 0 on (0, {b}]"
                    )
                raise DivergentIntegral("kernel integral diverges to -inf near 0")
            # sum_j c_j int_0^b z^(-1-al) e^(-q_j z) dz with sum c_j = 0:
            # analytic continuation Gamma(-al) sum c_j q_j^al minus the tails.
            q0 = singular[0][1]
            head = sum(c * math.expm1(al * math.log(q / q0)) for c, q in singular)
            head *= special.gamma(-al) * q0**al
            tails = sum(c * q**al * _upper_gamma(-al, q * b) for c, q in singular)
            total += head - tails
        return self.scale * total

    def expect(self, f, s=FULL):
        region = self.support & s
        total = 0.0
        for a, b in region.intervals:
            if a == 0.0:
                # substitute z = u**(1/(1-al)) to remove the z^(-1-al) singularity
                al = self.alpha
                top = min(b, 1.0)
                k = 1.0 / (1.0 - al)

                def g(u):
                    z = u**k
                    return f(z) * self.scale * math.exp(-self.tilt * z) * k * u ** (k - 1) * z ** (-1 - al)

                val, _ = _integrate.quad(g, 0.0, top ** (1 - al), epsrel=QUAD_EPSREL, epsabs=0.0, limit=200)
                total += val
                if b > 1.0:
                    total += self._quad(f, 1.0, b)
            else:
                total += self._quad(f, a, b)
        return total

    def sampler_pieces(self, s):
        al, th = self.alpha, self.tilt
        region = self.support & s
        if region.touches_zero():
            raise DivergentIntegral("cannot sample an infinite-activity component near 0")
        cut = min(1.0, 1.0 / th)
        out = []
        for lo, hi in ((0.0, cut), (cut, INF)):
            for a, b in region.clip(lo, hi):
                m = self.scale * self._moment(0, th, a, b)
                if m <= 0:
                    continue
                if hi == cut:
                    draw = self._power_envelope(a, b)
                else:
                    draw = self._exp_envelope(a, b)
                out.append((m, draw))
        return out

    def _power_envelope(self, a, b):
        al, th = self.alpha, self.tilt
        ra = a**-al
        rb = 0.0 if b == INF else b**-al

        def draw(rng, n):
            res = np.empty(n)
            filled = 0
            while filled < n:
                m = n - filled
                u = rng.random(m)
                z = (ra - u * (ra - rb)) ** (-1.0 / al)
                keep = rng.random(m) < np.exp(-th * (z - a))
                z = z[keep]
                res[filled : filled + z.size] = z
                filled += z.size
            return res

        return draw

    def _exp_envelope(self, a, b):
        al, th = self.alpha, self.tilt
        frac = 1.0 if b == INF else -math.expm1(-th * (b - a))

        def draw(rng, n):
            res = np.empty(n)
            filled = 0
            while filled < n:
                m = n - filled
                z = a - np.log1p(-rng.random(m) * frac) / th
                keep = rng.random(m) < (z / a) ** (-1.0 - al)
                z = z[keep]
                res[filled : filled + z.size] = z
                filled += z.size
            return res

        return draw

    def to_json(self):
        return {
            "kind": "tempered_power_law",
            "params": {"alpha": self.alpha, "tilt": self.tilt, "scale": self.scale},
        }


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


class Sampler:
    """Precomputed sampler for a measure restricted to a set."""

    def __init__(self, pieces):
        pieces = [(m, d) for m, d in pieces if m > 0]
        if not pieces:
            raise ZeroMass("measure has zero mass on the set")
        masses = np.array([m for m, _ in pieces])
        if not np.all(np.isfinite(masses)):
            raise DivergentIntegral("measure has infinite mass on the set")
        self.total = float(masses.sum())
        self.probs = masses / self.total
        self.cum = np.cumsum(self.probs)
        self.draws = [d for _, d in pieces]

    def draw(self, rng, size=None):
        n = 1 if size is None else int(size)
        if len(self.draws) == 1:
            out = self.draws[0](rng, n)
        else:
            idx = np.searchsorted(self.cum, rng.random(n), side="right")
            idx = np.minimum(idx, len(self.draws) - 1)
            out = np.empty(n)
            for j, d in enumerate(self.draws):
                mask = idx == j
                cnt = int(mask.sum())
                if cnt:
                    out[mask] = d(rng, cnt)
        if size is None:
            return float(out[0])
        return out


@dataclass(frozen=True)
class LevyMeasure:
    """Finite sum of measure components on (0, inf)."""

    components: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def zero(cls) -> "LevyMeasure":
        return cls(())

    @property
    def dim(self) -> int:
        return 1

    def __add__(self, other: "LevyMeasure") -> "LevyMeasure":
        return LevyMeasure(self.components + other.components)

    def is_zero(self) -> bool:
        return not self.components

    def integrate(self, kernel: str, s: JumpSet = FULL, lam: float | None = None) -> float:
        _kernel_pieces(kernel, lam)
        return math.fsum(c.integrate(kernel, s, lam) for c in self.components)

    def mass(self, s: JumpSet = FULL) -> float:
        try:
            return self.integrate("one", s)
        except DivergentIntegral:
            return INF

    def expect(self, f, s: JumpSet = FULL) -> float:
        return math.fsum(c.expect(f, s) for c in self.components)

    def restrict(self, s: JumpSet) -> "LevyMeasure":
        out = []
        for c in self.components:
            r = c.restrict(s)
            if r is not None:
                out.append(r)
        return LevyMeasure(tuple(out))

    def sampler(self, s: JumpSet = FULL) -> Sampler:
        pieces = []
        for c in self.components:
            pieces.extend(c.sampler_pieces(s))
        return Sampler(pieces)

    def sample(self, s: JumpSet, rng, size=None):
        return self.sampler(s).draw(rng, size)

    def atoms(self) -> list[Atom]:
        return [c for c in self.components if isinstance(c, Atom)]

    def to_json(self) -> list:
        out = []
        for c in self.components:
            rec = c.to_json()
            if c.support != FULL:
                rec["support"] = c.support.to_json()
            out.append(rec)
        return out


def integrate(m, kernel: str, s: JumpSet = FULL, lam: float | None = None) -> float:
    return m.integrate(kernel, s, lam)


def restrict(m, s):
    return m.restrict(s)


def sample(m: LevyMeasure, s: JumpSet, rng, size=None):
    return m.sample(s, rng, size)


# ---------------------------------------------------------------------------
# multi-type measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxSet:
    """Finite union of boxes ``prod_j (lo_j, hi_j]`` in R_+^d \\ {0}.

    A lower bound below zero admits zero coordinates.
    """

    boxes: tuple = ()

    def __post_init__(self):
        boxes = []
        for lo, hi in self.boxes:
            lo = tuple(_coerce_bound(v) for v in lo)
            hi = tuple(_coerce_bound(v) for v in hi)
            if len(lo) != len(hi):
                raise ValueError("box bounds differ in dimension")
            if any(not a < b for a, b in zip(lo, hi)):
                raise ValueError(f"empty box {lo} {hi}")
            boxes.append((lo, hi))
        dims = {len(lo) for lo, _ in boxes}
        if len(dims) > 1:
            raise ValueError("boxes of different dimensions")
        object.__setattr__(self, "boxes", tuple(boxes))

    def is_empty(self):
        return not self.boxes

    def contains(self, z) -> bool:
        z = tuple(float(v) for v in z)
        for lo, hi in self.boxes:
            if all(a < v <= b for a, v, b in zip(lo, z, hi)):
                return True
        return False

    def slice_first(self, offset: Sequence[float]) -> JumpSet:
        """Values r > 0 with ``r e_1 + offset`` inside the set."""
        out = []
        for lo, hi in self.boxes:
            if all(a < v <= b for a, v, b in zip(lo[1:], offset[1:], hi[1:])):
                a0 = max(lo[0], 0.0)
                if a0 < hi[0]:
                    out.append((a0, hi[0]))
        return JumpSet(tuple(out))


@dataclass(frozen=True)
class VectorMeasure:
    """Measure on R_+^d \\ {0} made of vector atoms and lifted pieces.

    ``atoms`` is a tuple of ``(location tuple, mass)``.  ``pieces`` is a tuple
    of ``(component, offset)`` where the component is a scalar
    :class:`MeasureComponent` and the piece is its image under
    ``r -> r e_1 + offset`` (``offset[0] == 0``).
    """

    d: int
    atoms: tuple = ()
    pieces: tuple = ()

    def __post_init__(self):
        atoms = []
        for loc, w in self.atoms:
            loc = tuple(float(v) for v in loc)
            if len(loc) != self.d:
                raise ValueError(f"atom {loc} is not {self.d}-dimensional")
            if any(v < 0 for v in loc) or not any(v > 0 for v in loc):
                raise ValueError(f"atom {loc} is outside R_+^d \\ {{0}}")
            if w < 0:
                raise ValueError("atom mass must be nonnegative")
            atoms.append((loc, float(w)))
        pieces = []
        for comp, off in self.pieces:
            off = tuple(float(v) for v in off)
            if len(off) != self.d or off[0] != 0.0 or any(v < 0 for v in off):
                raise ValueError(f"bad piece offset {off}")
            pieces.append((comp, off))
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "pieces", tuple(pieces))

    @property
    def dim(self):
        return self.d

    def is_zero(self):
        return not self.atoms and not self.pieces

    def expect(self, g: Callable[[np.ndarray], float]) -> float:
        """Integral of ``g(z)`` for a vector-valued argument."""
        vals = [w * g(np.array(loc)) for loc, w in self.atoms]
        for comp, off in self.pieces:
            base = np.array(off)

            def h(r, base=base):
                z = base.copy()
                z[0] = r
                return g(z)

            vals.append(comp.expect(h))
        return math.fsum(vals)

    def mass(self, s: BoxSet | None = None) -> float:
        total = [w for loc, w in self.atoms if s is None or s.contains(loc)]
        for comp, off in self.pieces:
            piece_set = FULL if s is None else s.slice_first(off)
            try:
                total.append(comp.mass(piece_set))
            except DivergentIntegral:
                return INF
        return math.fsum(total)

    def restrict(self, s: BoxSet, keep_inside: bool = True) -> "VectorMeasure":
        atoms = tuple((loc, w) for loc, w in self.atoms if s.contains(loc) == keep_inside)
        pieces = []
        for comp, off in self.pieces:
            sl = s.slice_first(off)
            r = comp.restrict(sl if keep_inside else sl.complement())
            if r is not None:
                pieces.append((r, off))
        return VectorMeasure(self.d, atoms, tuple(pieces))

    def to_json(self) -> dict:
        return {
            "atoms": [{"loc": list(loc), "mass": w} for loc, w in self.atoms],
            "pieces": [{"component": c.to_json(), "offset": list(o)} for c, o in self.pieces],
        }


def component_from_record(rec: dict) -> MeasureComponent:
    kind = rec.get("kind")
    params = dict(rec.get("params", {}))
    support = JumpSet(tuple(tuple(p) for p in rec["support"])) if "support" in rec else FULL
    if kind == "atom":
        return Atom(float(params["loc"]), float(params.get("mass", 1.0)), support)
    if kind == "exp":
        return ExpDensity(float(params["rate"]), float(params.get("mass", 1.0)), support)
    if kind == "tempered_power_law":
        return TemperedPowerLaw(
            float(params["alpha"]), float(params["tilt"]), float(params.get("scale", 1.0)), support
        )
    raise ValueError(f"unknown measure kind {kind!r}")


def measure_from_records(records: Iterable[dict]) -> LevyMeasure:
    return LevyMeasure(tuple(component_from_record(r) for r in records))
