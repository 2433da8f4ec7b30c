"""Metric spaces the lab works in, with exact distance functions.

Four spaces are provided: ``Euclidean(d)``, the ultrametric sequence space
``UltrametricSeq`` (``d(x, y) = 2**-i`` with ``i`` the first differing
position, 1-based), the countable ``NestedBallSpace`` ``{x_0} U {x_n}`` with
``d(x_n, x_m) = max(r_n, r_m)`` and ``d(x_0, x_n) = r_n``, and the Heisenberg
group with the Cygan-Koranyi gauge ``((x^2 + y^2)^2 + z^2)^(1/4)`` under the
group law ``(x, y, z)(x', y', z') = (x + x', y + y', z + z' - 2xy' + 2yx')``.

Every space works on single points (the ``*Point`` types) and on batches
(NumPy arrays, see ``as_batch``) so that samples of size 1e5 stay cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from . import _kernels


class PointMismatchError(TypeError):
    """A point of the wrong variant was handed to a space."""


@dataclass(frozen=True)
class EuclideanPoint:
    coords: tuple

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        if not coords or not all(math.isfinite(c) for c in coords):
            raise ValueError("EuclideanPoint needs a nonempty vector of finite reals")
        object.__setattr__(self, "coords", coords)

    @property
    def dimension(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class SeqPoint:
    """Finite word; position 1 is ``symbols[0]``."""

    symbols: tuple

    def __post_init__(self):
        symbols = tuple(int(s) for s in self.symbols)
        if not symbols:
            raise ValueError("SeqPoint strings are nonempty")
        object.__setattr__(self, "symbols", symbols)


@dataclass(frozen=True)
class NestedPoint:
    """``index == 0`` is the limit point ``x``; ``index == n >= 1`` is ``x_n``."""

    index: int

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 0:
            raise ValueError("NestedPoint index must be an integer >= 0")
        object.__setattr__(self, "index", int(self.index))


class HeisPoint(NamedTuple):
    x: float
    y: float
    z: float


Point = Union[EuclideanPoint, SeqPoint, NestedPoint, HeisPoint]


# ---------------------------------------------------------------------------
# Heisenberg group, C = -2


def heis_mul(p: HeisPoint, q: HeisPoint) -> HeisPoint:
    x, y, z = p
    a, b, c = q
    return HeisPoint(x + a, y + b, z + c - 2.0 * x * b + 2.0 * y * a)


def heis_inv(p: HeisPoint) -> HeisPoint:
    return HeisPoint(-p[0], -p[1], -p[2])


def heis_norm(p: HeisPoint) -> float:
    x, y, z = p
    # hypot keeps z**2 from underflowing
    return math.sqrt(math.hypot(x * x + y * y, z))


def heis_dilate(p: HeisPoint, t: float) -> HeisPoint:
    if not t > 0:
        raise ValueError(f"dilation factor must be positive, got {t}")
    return HeisPoint(t * p[0], t * p[1], t * t * p[2])


def heis_mul_batch(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    out = P + Q
    out[..., 2] += -2.0 * P[..., 0] * Q[..., 1] + 2.0 * P[..., 1] * Q[..., 0]
    return out


def heis_norm_batch(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    return np.sqrt(np.hypot(P[..., 0] ** 2 + P[..., 1] ** 2, P[..., 2]))


def heis_dilate_batch(P: np.ndarray, t: float) -> np.ndarray:
    if not t > 0:
        raise ValueError(f"dilation factor must be positive, got {t}")
    P = np.array(P, dtype=float)
    P[..., :2] *= t
    P[..., 2] *= t * t
    return P


def heis_distance_batch(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise ``|P^-1 Q|_H`` (broadcasting)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    dx = Q[..., 0] - P[..., 0]
    dy = Q[..., 1] - P[..., 1]
    dz = Q[..., 2] - P[..., 2] + 2.0 * P[..., 0] * Q[..., 1] - 2.0 * P[..., 1] * Q[..., 0]
    return np.sqrt(np.hypot(dx * dx + dy * dy, dz))


def heis_distance4_exact(p: HeisPoint, q: HeisPoint) -> Fraction:
    """``d(p, q)**4`` in exact rational arithmetic on the float inputs."""
    x, y, z = (Fraction(v) for v in p)
    a, b, c = (Fraction(v) for v in q)
    h = (a - x) ** 2 + (b - y) ** 2
    w = c - z + 2 * x * b - 2 * y * a
    return h * h + w * w


def heis_norm4_exact(p: HeisPoint) -> Fraction:
    x, y, z = (Fraction(v) for v in p)
    h = x * x + y * y
    return h * h + z * z


# ---------------------------------------------------------------------------
# Spaces


class MetricSpace:
    """Common interface; concrete spaces below."""

    point_type: type = object

    def check_point(self, p) -> None:
        if not isinstance(p, self.point_type):
            raise PointMismatchError(
                f"{type(self).__name__} expects {self.point_type.__name__}, got {type(p).__name__}"
            )

    def distance(self, p, q) -> float:
        raise NotImplementedError

    def as_batch(self, points: Sequence) -> np.ndarray:
        raise NotImplementedError

    def point_at(self, batch: np.ndarray, i: int):
        raise NotImplementedError

    def raw(self, q):
        """Batch-row form of a point (accepts a point object or a row)."""
        raise NotImplementedError

    def distances_to(self, batch: np.ndarray, q) -> np.ndarray:
        raise NotImplementedError

    def distance_keys(self, batch: np.ndarray, q) -> np.ndarray:
        """Float keys ordered like the distances, with exactly the same ties."""
        return self.distances_to(batch, q)

    def compare_radius(self, batch: np.ndarray, q, r: float) -> np.ndarray:
        """Exact sign of ``d(batch_i, q) - r`` as int8 (-1, 0, 1)."""
        return np.sign(self.distances_to(batch, q) - r).astype(np.int8)

    @property
    def is_ultrametric(self) -> bool:
        return False


@dataclass(frozen=True)
class Euclidean(MetricSpace):
    d: int
    point_type = EuclideanPoint

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")

    def check_point(self, p) -> None:
        super().check_point(p)
        if p.dimension != self.d:
            raise PointMismatchError(f"expected dimension {self.d}, got {p.dimension}")

    def distance(self, p: EuclideanPoint, q: EuclideanPoint) -> float:
        self.check_point(p)
        self.check_point(q)
        return math.dist(p.coords, q.coords)

    def as_batch(self, points) -> np.ndarray:
        for p in points:
            self.check_point(p)
        return np.array([p.coords for p in points], dtype=float).reshape(-1, self.d)

    def point_at(self, batch, i):
        return EuclideanPoint(tuple(batch[i]))

    def raw(self, q) -> np.ndarray:
        if isinstance(q, EuclideanPoint):
            self.check_point(q)
            return np.asarray(q.coords)
        return np.asarray(q, dtype=float).reshape(self.d)

    def distances_to(self, batch, q) -> np.ndarray:
        return np.sqrt(self.distance_keys(batch, q))

    def distance_keys(self, batch, q) -> np.ndarray:
        diff = np.asarray(batch, dtype=float).reshape(-1, self.d) - self.raw(q)
        return np.einsum("ij,ij->i", diff, diff)


@dataclass(frozen=True)
class UltrametricSeq(MetricSpace):
    """Words with ``d(x, y) = 2**-min{i : x_i != y_i}``.

    Words of different length that agree on the shorter one differ at the
    position right after it. Batches are ``uint8`` arrays of equal-length words.
    """

    point_type = SeqPoint

    @property
    def is_ultrametric(self) -> bool:
        return True

    def distance(self, p: SeqPoint, q: SeqPoint) -> float:
        self.check_point(p)
        self.check_point(q)
        a, b = p.symbols, q.symbols
        for i, (s, t) in enumerate(zip(a, b), start=1):
            if s != t:
                return math.ldexp(1.0, -i)
        if len(a) == len(b):
            return 0.0
        return math.ldexp(1.0, -(min(len(a), len(b)) + 1))

    def as_batch(self, points) -> np.ndarray:
        for p in points:
            self.check_point(p)
        lengths = {len(p.symbols) for p in points}
        if len(lengths) > 1:
            raise ValueError("a batch needs words of one common length")
        return np.array([p.symbols for p in points], dtype=np.uint8)

    def point_at(self, batch, i):
        return SeqPoint(tuple(int(s) for s in batch[i]))

    def raw(self, q) -> np.ndarray:
        return np.asarray(q.symbols if isinstance(q, SeqPoint) else q, dtype=np.uint8)

    def first_diff(self, batch, q) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.uint8)
        qa = self.raw(q)
        if qa.shape[0] != batch.shape[1]:
            raise ValueError("query length differs from batch word length")
        return _kernels.first_diff_index(batch, qa)

    def distances_to(self, batch, q) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.uint8)
        idx = self.first_diff(batch, q)
        out = np.ldexp(1.0, -idx)
        out[idx > batch.shape[1]] = 0.0
        return out


def dyadic_radius(n):
    """Default radii ``r_n = 2**-n``."""
    return np.ldexp(1.0, -np.asarray(n, dtype=np.int64))


INF_LEVEL = np.iinfo(np.int64).max


@dataclass(frozen=True)
class NestedBallSpace(MetricSpace):
    """Discrete ultrametric ``{x_0} U {x_n : n >= 1}``.

    ``d(x_n, x_m) = r_min(n, m)`` for distinct ``n, m >= 1`` and
    ``d(x_0, x_n) = r_n``; ``x_0`` behaves as index infinity. Distances are
    handled through integer *levels* (``d = r_level``) so that comparisons stay
    exact even where ``r_n`` underflows.
    """

    radius: Callable = field(default=dyadic_radius, compare=False)
    point_type = NestedPoint

    def __post_init__(self):
        r = np.asarray(self.radius(np.arange(1, 65)), dtype=float)
        if not (np.all(r > 0) and np.all(np.diff(r) < 0)):
            raise ValueError("radii r_n must be positive and strictly decreasing")

    @property
    def is_ultrametric(self) -> bool:
        return True

    def r(self, n):
        return self.radius(n)

    @staticmethod
    def levels(batch, q: int) -> np.ndarray:
        """Level of ``d(batch_i, x_q)``; ``INF_LEVEL`` marks identical points."""
        a = np.asarray(batch, dtype=np.int64)
        a_eff = np.where(a == 0, INF_LEVEL, a)
        q_eff = INF_LEVEL if q == 0 else q
        lev = np.minimum(a_eff, q_eff)
        return np.where(a == q, INF_LEVEL, lev)

    def distance(self, p: NestedPoint, q: NestedPoint) -> float:
        self.check_point(p)
        self.check_point(q)
        if p.index == q.index:
            return 0.0
        lev = min(p.index or INF_LEVEL, q.index or INF_LEVEL)
        return float(self.radius(lev))

    def as_batch(self, points) -> np.ndarray:
        for p in points:
            self.check_point(p)
        return np.array([p.index for p in points], dtype=np.int64)

    def point_at(self, batch, i):
        return NestedPoint(int(batch[i]))

    @staticmethod
    def raw(q) -> int:
        return q.index if isinstance(q, NestedPoint) else int(q)

    def distances_to(self, batch, q) -> np.ndarray:
        lev = self.levels(batch, self.raw(q))
        same = lev == INF_LEVEL
        out = np.asarray(self.radius(np.where(same, 1, lev)), dtype=float)
        return np.where(same, 0.0, out)

    def distance_keys(self, batch, q) -> np.ndarray:
        lev = self.levels(batch, self.raw(q)).astype(float)
        return np.where(lev == float(INF_LEVEL), -np.inf, -lev)

    def compare_radius(self, batch, q, r: float) -> np.ndarray:
        lev = self.levels(batch, self.raw(q))
        same = lev == INF_LEVEL
        if r <= 0:
            return np.where(same, 0, 1).astype(np.int8)
        d = np.asarray(self.radius(np.where(same, 1, lev)), dtype=float)
        # an underflowed r_level is still a positive number below r
        return np.where(same, -1, np.sign(d - r)).astype(np.int8)

    def first_level_below(self, r: float, closed: bool) -> int:
        """Smallest ``n >= 1`` with ``r_n < r`` (open) or ``r_n <= r`` (closed)."""
        if r <= 0:
            raise ValueError("radius must be positive")

        def ok(n):
            v = float(self.radius(n))
            return v <= r if closed else v < r

        hi = 1
        while not ok(hi):
            hi *= 2
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi


@dataclass(frozen=True)
class Heisenberg(MetricSpace):
    """Heisenberg group with the Cygan-Koranyi metric ``d(p, q) = |p^-1 q|_H``."""

    point_type = HeisPoint

    def check_point(self, p) -> None:
        if not (isinstance(p, tuple) and len(p) == 3 and not isinstance(p, (EuclideanPoint,))):
            raise PointMismatchError(f"Heisenberg expects HeisPoint, got {type(p).__name__}")

    def distance(self, p, q) -> float:
        self.check_point(p)
        self.check_point(q)
        return heis_norm(heis_mul(heis_inv(HeisPoint(*p)), HeisPoint(*q)))

    def as_batch(self, points) -> np.ndarray:
        for p in points:
            self.check_point(p)
        return np.array([tuple(p) for p in points], dtype=float).reshape(-1, 3)

    def point_at(self, batch, i):
        return HeisPoint(*map(float, batch[i]))

    def raw(self, q) -> np.ndarray:
        return np.asarray(tuple(q), dtype=float).reshape(3)

    def distances_to(self, batch, q) -> np.ndarray:
        return heis_distance_batch(np.asarray(batch, dtype=float).reshape(-1, 3), self.raw(q))


Space = Union[Euclidean, UltrametricSeq, NestedBallSpace, Heisenberg]


def distance(space: MetricSpace, p, q) -> float:
    return space.distance(p, q)
