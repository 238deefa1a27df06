"""
Interval arithmetic kernel
Closed real intervals, interval vectors and dense interval matrices with Moore arithmetic.

Endpoints are plain doubles: there is no directed rounding, so enclosures are exact
only up to floating-point rounding (far below the 1e-4 stopping tolerance used by
the Krawczyk solver). Division is deliberately absent.

Vectors and matrices keep their endpoints in read-only numpy arrays, so every value
is immutable once built and can be shared across threads.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from errors import DimensionMismatch, EmptyIntersection, InvalidInterval

Number = Union[int, float]


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]"""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InvalidInterval(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")

    @classmethod
    def point(cls, value: Number) -> "Interval":
        return cls(float(value), float(value))

    @classmethod
    def around(cls, center: Number, radius: Number) -> "Interval":
        return cls(center - radius, center + radius)

    def __add__(self, other: "Interval") -> "Interval":
        return iv_add(self, _as_interval(other))

    __radd__ = __add__

    def __sub__(self, other: "Interval") -> "Interval":
        return iv_sub(self, _as_interval(other))

    def __rsub__(self, other) -> "Interval":
        return iv_sub(_as_interval(other), self)

    def __neg__(self) -> "Interval":
        return iv_neg(self)

    def __mul__(self, other: "Interval") -> "Interval":
        return iv_mul(self, _as_interval(other))

    __rmul__ = __mul__

    def __and__(self, other: "Interval") -> "Interval":
        return iv_intersect(self, other)

    @property
    def mid(self) -> float:
        return iv_mid(self)

    @property
    def rad(self) -> float:
        return iv_rad(self)

    def __contains__(self, x: Number) -> bool:
        return iv_contains(self, x)

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi


def _as_interval(value) -> Interval:
    if isinstance(value, Interval):
        return value
    return Interval.point(value)


def iv_add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def iv_neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def iv_sub(a: Interval, b: Interval) -> Interval:
    return iv_add(a, iv_neg(b))


def iv_mul(a: Interval, b: Interval) -> Interval:
    products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(products), max(products))


def iv_intersect(a: Interval, b: Interval) -> Interval:
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if lo > hi:
        raise EmptyIntersection(f"[{a.lo}, {a.hi}] and [{b.lo}, {b.hi}] do not overlap")
    return Interval(lo, hi)


def iv_mid(a: Interval) -> float:
    return 0.5 * (a.lo + a.hi)


def iv_rad(a: Interval) -> float:
    return 0.5 * (a.hi - a.lo)


def iv_contains(a: Interval, x: Number) -> bool:
    return a.lo <= x <= a.hi


class IntervalVector:
    """Fixed-length vector of intervals stored as endpoint arrays"""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = _frozen(lo)
        hi = lo if hi is None else _frozen(hi)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionMismatch(f"endpoint arrays must be 1-D and equal length, got {lo.shape} and {hi.shape}")
        if np.any(lo > hi) or np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            bad = int(np.argmax(~(lo <= hi)))
            raise InvalidInterval(f"element {bad}: lower bound {lo[bad]} exceeds upper bound {hi[bad]}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalVector is immutable")

    @classmethod
    def from_intervals(cls, elems: Iterable[Interval]) -> "IntervalVector":
        elems = list(elems)
        return cls([e.lo for e in elems], [e.hi for e in elems])

    @classmethod
    def from_midrad(cls, mid, rad) -> "IntervalVector":
        mid = np.asarray(mid, dtype=float)
        rad = np.broadcast_to(np.asarray(rad, dtype=float), mid.shape)
        return cls(mid - rad, mid + rad)

    @classmethod
    def symmetric(cls, size: int, alpha: float) -> "IntervalVector":
        return cls(np.full(size, -alpha), np.full(size, alpha))

    def __len__(self) -> int:
        return self.lo.shape[0]

    def __getitem__(self, index):
        if isinstance(index, slice):
            return IntervalVector(self.lo[index], self.hi[index])
        return Interval(float(self.lo[index]), float(self.hi[index]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __add__(self, other: "IntervalVector") -> "IntervalVector":
        _check_same_length(self, other)
        return IntervalVector(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "IntervalVector") -> "IntervalVector":
        _check_same_length(self, other)
        return IntervalVector(self.lo - other.hi, self.hi - other.lo)

    def __neg__(self) -> "IntervalVector":
        return IntervalVector(-self.hi, -self.lo)

    def __repr__(self) -> str:
        body = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in zip(self.lo[:6], self.hi[:6]))
        more = ", ..." if len(self) > 6 else ""
        return f"IntervalVector({body}{more})"

    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def rad(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != self.lo.shape:
            raise DimensionMismatch(f"point of shape {x.shape} against vector of length {len(self)}")
        return bool(np.all((self.lo <= x) & (x <= self.hi)))

    def subset_of(self, other: "IntervalVector") -> bool:
        _check_same_length(self, other)
        return bool(np.all((other.lo <= self.lo) & (self.hi <= other.hi)))

    def intersect(self, other: "IntervalVector") -> "IntervalVector":
        return ivv_intersect(self, other)


class IntervalMatrix:
    """Dense row-major grid of intervals"""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = _frozen(lo)
        hi = lo if hi is None else _frozen(hi)
        if lo.ndim != 2 or lo.shape != hi.shape or 0 in lo.shape:
            raise DimensionMismatch(f"endpoint arrays must be non-empty 2-D and equal shape, got {lo.shape} and {hi.shape}")
        if np.any(lo > hi) or np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidInterval("matrix entry with lower bound above upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalMatrix is immutable")

    @classmethod
    def from_point(cls, matrix) -> "IntervalMatrix":
        return cls(matrix)

    @classmethod
    def from_midrad(cls, mid, rad) -> "IntervalMatrix":
        mid = np.asarray(mid, dtype=float)
        rad = np.broadcast_to(np.asarray(rad, dtype=float), mid.shape)
        return cls(mid - rad, mid + rad)

    @classmethod
    def from_intervals(cls, rows: Sequence[Sequence[Interval]]) -> "IntervalMatrix":
        return cls([[e.lo for e in row] for row in rows], [[e.hi for e in row] for row in rows])

    @classmethod
    def identity(cls, size: int) -> "IntervalMatrix":
        return cls(np.eye(size))

    @classmethod
    def block(cls, blocks) -> "IntervalMatrix":
        """Assemble from a nested list of IntervalMatrix / point-array blocks"""
        def lo_of(b):
            return b.lo if isinstance(b, IntervalMatrix) else np.asarray(b, dtype=float)

        def hi_of(b):
            return b.hi if isinstance(b, IntervalMatrix) else np.asarray(b, dtype=float)

        return cls(np.block([[lo_of(b) for b in row] for row in blocks]),
                   np.block([[hi_of(b) for b in row] for row in blocks]))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def rows(self) -> int:
        return self.lo.shape[0]

    @property
    def cols(self) -> int:
        return self.lo.shape[1]

    @property
    def T(self) -> "IntervalMatrix":
        return IntervalMatrix(self.lo.T, self.hi.T)

    def __getitem__(self, index) -> Interval:
        i, j = index
        return Interval(float(self.lo[i, j]), float(self.hi[i, j]))

    def __sub__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot subtract {other.shape} from {self.shape}")
        return IntervalMatrix(self.lo - other.hi, self.hi - other.lo)

    def __add__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot add {other.shape} to {self.shape}")
        return IntervalMatrix(self.lo + other.lo, self.hi + other.hi)

    def __repr__(self) -> str:
        return f"IntervalMatrix({self.rows}x{self.cols}, max radius {float(np.max(self.rad())):.3g})"

    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def rad(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def is_point(self) -> bool:
        return bool(np.all(self.lo == self.hi))

    def contains(self, matrix) -> bool:
        matrix = np.asarray(matrix, dtype=float)
        return bool(np.all((self.lo <= matrix) & (matrix <= self.hi)))

    def inf_norm(self) -> float:
        """Max row sum of entry magnitudes max(|lo|, |hi|)"""
        return float(np.max(np.sum(self.mag(), axis=1)))


def _check_same_length(a: IntervalVector, b: IntervalVector):
    if len(a) != len(b):
        raise DimensionMismatch(f"vector lengths differ: {len(a)} vs {len(b)}")


def _endpoint_products(a_lo, a_hi, b_lo, b_hi):
    products = (a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi)
    return np.minimum.reduce(products), np.maximum.reduce(products)


def ivm_matvec(m: IntervalMatrix, v: IntervalVector) -> IntervalVector:
    """Interval matrix-vector product, entrywise iv_mul then iv_add"""
    if m.cols != len(v):
        raise DimensionMismatch(f"matrix {m.shape} cannot multiply vector of length {len(v)}")
    if m.is_point():
        # point row times interval vector is exact in midpoint-radius form
        center = m.lo @ v.mid()
        spread = np.abs(m.lo) @ v.rad()
        return IntervalVector(center - spread, center + spread)
    lo, hi = _endpoint_products(m.lo, m.hi, v.lo[np.newaxis, :], v.hi[np.newaxis, :])
    return IntervalVector(lo.sum(axis=1), hi.sum(axis=1))


def ivm_mag_matvec(mag: np.ndarray, v: IntervalVector) -> IntervalVector:
    """Enclosure of M·v for any M with |M| ≤ mag entrywise: ±mag·|v|

    Sharp when M is centred at zero, as I − C·𝒜 is for C = Mid(𝒜)⁻¹.
    """
    if mag.shape[1] != len(v):
        raise DimensionMismatch(f"matrix {mag.shape} cannot multiply vector of length {len(v)}")
    spread = mag @ v.mag()
    return IntervalVector(-spread, spread)


def ivm_matmul(m: IntervalMatrix, n: IntervalMatrix) -> IntervalMatrix:
    """Interval matrix product"""
    if m.cols != n.rows:
        raise DimensionMismatch(f"matrix {m.shape} cannot multiply matrix {n.shape}")
    if m.is_point():
        center = m.lo @ n.mid()
        spread = np.abs(m.lo) @ n.rad()
        return IntervalMatrix(center - spread, center + spread)
    if n.is_point():
        center = m.mid() @ n.lo
        spread = m.rad() @ np.abs(n.lo)
        return IntervalMatrix(center - spread, center + spread)
    lo = np.zeros((m.rows, n.cols))
    hi = np.zeros((m.rows, n.cols))
    for k in range(m.cols):
        term_lo, term_hi = _endpoint_products(m.lo[:, k, np.newaxis], m.hi[:, k, np.newaxis],
                                              n.lo[np.newaxis, k, :], n.hi[np.newaxis, k, :])
        lo += term_lo
        hi += term_hi
    return IntervalMatrix(lo, hi)


def ivv_intersect(a: IntervalVector, b: IntervalVector) -> IntervalVector:
    _check_same_length(a, b)
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    empty = lo > hi
    if np.any(empty):
        i = int(np.argmax(empty))
        raise EmptyIntersection(
            f"element {i}: [{a.lo[i]}, {a.hi[i]}] and [{b.lo[i]}, {b.hi[i]}] do not overlap")
    return IntervalVector(lo, hi)


def ivv_inf_norm(v: IntervalVector) -> float:
    return float(np.max(v.mag())) if len(v) else 0.0


def ivv_distance(a: IntervalVector, b: IntervalVector) -> float:
    """Max over elements of the Hausdorff distance max(|Δlo|, |Δhi|)"""
    _check_same_length(a, b)
    if not len(a):
        return 0.0
    return float(np.max(np.maximum(np.abs(a.lo - b.lo), np.abs(a.hi - b.hi))))
