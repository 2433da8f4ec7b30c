"""Probability models with ball-measure oracles, and the quantities built on them.

Every model exposes ``ball_measure`` (exact for the constructed models,
quadrature or closed form for the continuous ones, empirical for
``MonteCarloModel``), a sampler, and ``r_alpha``. On top of these sit the
extended-domain quantities on ``Omega x [0, 1]``:

* ``r_alpha(x) = inf{r > 0 : mu(B(x, r)) >= alpha}``
* ``B(x, z, r, b) = B(x, r) x I  U  S(x, r) x N(z, b)``
* ``b_alpha(x, z)``, the band half-width giving ``B(x, z, r_alpha(x), b)``
  product measure exactly ``alpha``
* ``D(x, z, alpha)``, the set of ``(y, w)`` whose alpha-ball captures ``(x, z)``.

Comparisons of masses against ``alpha`` use a relative slack of ``MASS_RTOL``
so that values such as ``alpha = 0.01`` meet the mass ``1/100`` they denote.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats

from .metric_core import (
    INF_LEVEL,
    Euclidean,
    MetricSpace,
    NestedBallSpace,
    UltrametricSeq,
)

MASS_RTOL = 1e-12
BISECT_TOL = 1e-10


def reaches(mass, alpha):
    """``mass >= alpha`` up to rounding in the mass."""
    return np.asarray(mass) >= alpha * (1.0 - MASS_RTOL)


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _check_alpha(alpha, upper_open=False):
    ok = 0 < alpha < 1 if upper_open else 0 < alpha <= 1
    if not ok:
        raise ValueError(f"alpha={alpha} outside {'(0, 1)' if upper_open else '(0, 1]'}")


# ---------------------------------------------------------------------------
# Models


class ProbabilityModel:
    """Sampler plus ball-measure oracle on a metric space."""

    space: MetricSpace
    exact: bool = True

    def sample(self, rng, n: int) -> np.ndarray:
        raise NotImplementedError

    def ball_measure_batch(self, ys, radii, closed: bool) -> np.ndarray:
        """``mu(B(y_i, r_i))`` for each row of ``ys`` (``radii`` broadcasts)."""
        raise NotImplementedError

    def ball_measure(self, x, r: float, closed: bool = True) -> float:
        if r < 0:
            raise ValueError("radius must be >= 0")
        if r == 0 and not closed:
            return 0.0
        xs = self._as_rows([self.space.raw(x)])
        return float(self.ball_measure_batch(xs, np.array([r], dtype=float), closed)[0])

    def _as_rows(self, rows) -> np.ndarray:
        return np.asarray(rows)

    # r_alpha -------------------------------------------------------------

    def diameter(self) -> float:
        return math.inf

    def r_alpha_batch(self, ys, alpha: float) -> np.ndarray:
        """Bisection on the open-ball measure; suits atomless models."""
        _check_alpha(alpha)
        ys = np.asarray(ys)
        n = len(ys)
        hi_val = self.diameter()
        if not math.isfinite(hi_val):
            hi_val = 1.0
            while not np.all(reaches(self.ball_measure_batch(ys, np.full(n, hi_val), False), alpha)):
                hi_val *= 2.0
        lo = np.zeros(n)
        hi = np.full(n, hi_val)
        while np.max(hi - lo) > BISECT_TOL:
            mid = 0.5 * (lo + hi)
            ok = reaches(self.ball_measure_batch(ys, mid, False), alpha)
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return hi

    def r_alpha(self, x, alpha: float) -> float:
        _check_alpha(alpha)
        return float(self.r_alpha_batch(self._as_rows([self.space.raw(x)]), alpha)[0])

    # relations used by the D(x, z, alpha) membership test -----------------

    def masses_at_distance(self, ys, x):
        """Closed and open masses of the balls around ``y_i`` of radius ``d(y_i, x)``."""
        d = self.space.distances_to(ys, x)
        return self.ball_measure_batch(ys, d, True), self.ball_measure_batch(ys, d, False)

    def r_alpha_relation(self, ys, x, alpha):
        """``sign(d(y_i, x) - r_alpha(y_i))`` and the open/closed masses at ``r_alpha(y_i)``."""
        r = self.r_alpha_batch(ys, alpha)
        d = self.space.distances_to(ys, x)
        sign = np.sign(d - r).astype(np.int8)
        return sign, self.ball_measure_batch(ys, r, False), self.ball_measure_batch(ys, r, True)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """``E_mu f`` by exact summation or quadrature, where available."""
        raise NotImplementedError(f"{type(self).__name__} has no quadrature; use Monte-Carlo")


class DiscreteModel(ProbabilityModel):
    """Finitely many atoms with given weights; all oracles are exact sums."""

    def __init__(self, space: MetricSpace, atoms, weights=None):
        self.space = space
        self.atoms = np.asarray(atoms)
        n = len(self.atoms)
        if n == 0:
            raise ValueError("need at least one atom")
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("weights must be nonnegative and sum to 1")
        self.weights = w
        self._cache: dict = {}

    def _key(self, y) -> bytes:
        return np.ascontiguousarray(y).tobytes()

    def sample(self, rng, n: int) -> np.ndarray:
        idx = _rng(rng).choice(len(self.atoms), size=n, p=self.weights)
        return self.atoms[idx]

    def _sorted_profile(self, y):
        """Distinct distances from ``y`` to the atoms with cumulative closed masses."""
        key = ("profile", self._key(y))
        if key not in self._cache:
            keys = self.space.distance_keys(self.atoms, y)
            dist = self.space.distances_to(self.atoms, y)
            order = np.argsort(keys, kind="stable")
            k_sorted = keys[order]
            starts = np.flatnonzero(np.r_[True, k_sorted[1:] != k_sorted[:-1]])
            cum = np.cumsum(self.weights[order])
            ends = np.r_[starts[1:], len(order)] - 1
            self._cache[key] = (dist[order][starts], cum[ends], np.r_[0.0, cum[ends][:-1]])
        return self._cache[key]

    def ball_measure_batch(self, ys, radii, closed: bool) -> np.ndarray:
        ys = np.asarray(ys)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(ys),))
        out = np.empty(len(ys))
        memo = {}
        for i, (y, r) in enumerate(zip(ys, radii)):
            key = (self._key(y), float(r))
            if key not in memo:
                if r == 0 and not closed:
                    memo[key] = 0.0
                else:
                    cmp = self.space.compare_radius(self.atoms, y, float(r))
                    memo[key] = float(self.weights[cmp <= 0].sum() if closed else self.weights[cmp < 0].sum())
            out[i] = memo[key]
        return out

    def r_alpha_batch(self, ys, alpha: float) -> np.ndarray:
        """Smallest distance value ``t`` with ``mu(B̄(y, t)) >= alpha``."""
        _check_alpha(alpha)
        out = np.empty(len(ys))
        for i, y in enumerate(ys):
            dist, closed_cum, _ = self._sorted_profile(y)
            out[i] = dist[int(np.argmax(reaches(closed_cum, alpha)))]
        return out

    def masses_at_distance(self, ys, x):
        ys = np.asarray(ys)
        closed = np.empty(len(ys))
        open_ = np.empty(len(ys))
        memo = {}
        for i, y in enumerate(ys):
            key = self._key(y)
            if key not in memo:
                d = self.space.distances_to(np.asarray([y]), x)[0]
                memo[key] = (
                    self.ball_measure_batch([y], [d], True)[0],
                    self.ball_measure_batch([y], [d], False)[0],
                )
            closed[i], open_[i] = memo[key]
        return closed, open_

    def atoms_for_D(self, x, alpha):
        return self.atoms, self.weights

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.atoms)))


def dirac_model(space: MetricSpace, point) -> DiscreteModel:
    return DiscreteModel(space, [space.raw(point)], [1.0])


class MonteCarloModel(DiscreteModel):
    """Empirical measure of a fixed reference sample standing in for ``mu``.

    Oracles are exact for the empirical measure; ``ball_measure_with_error``
    adds the binomial standard error relative to ``mu``.
    """

    exact = False

    def __init__(self, space: MetricSpace, sampler: Callable, M: int = 100_000, seed=0):
        self.sampler = sampler
        self.M = int(M)
        super().__init__(space, sampler(_rng(seed), self.M))
        self._fresh = sampler

    def sample(self, rng, n: int) -> np.ndarray:
        return self._fresh(_rng(rng), n)

    def ball_measure_with_error(self, x, r: float, closed: bool = True) -> tuple[float, float]:
        p = self.ball_measure(x, r, closed)
        return p, math.sqrt(max(p * (1 - p), 0.0) / self.M)


class NestedBallModel(ProbabilityModel):
    """``mu{x_n} = 1/n - 1/(n+1)`` on the nested-ball space, ``mu{x_0} = 0``.

    Ball masses follow from the levels: the closed ball around ``x_n`` holding
    every point at level ``>= j`` has mass ``1/j`` when ``j <= n`` and is just
    ``{x_n}`` (mass ``1/(n(n+1))``) otherwise; around ``x_0`` it has mass ``1/j``.
    """

    def __init__(self, space: Optional[NestedBallSpace] = None):
        self.space = space if space is not None else NestedBallSpace()

    @staticmethod
    def atom_mass(n):
        n = np.asarray(n, dtype=float)
        return np.where(n > 0, 1.0 / np.maximum(n, 1.0) / (n + 1.0), 0.0)

    @staticmethod
    def level_mass(centers, j):
        """Mass of ``{center} U {points at level >= j from center}``."""
        n = np.asarray(centers, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        jf = np.where(j >= INF_LEVEL, np.inf, j.astype(float))
        spread = 1.0 / jf
        own = NestedBallModel.atom_mass(n)
        return np.where((n == 0) | (j <= n), spread, own)

    def sample(self, rng, n: int) -> np.ndarray:
        u = 1.0 - _rng(rng).random(n)
        return np.floor(1.0 / u).astype(np.int64)

    def _threshold(self, r: float, closed: bool) -> int:
        if r == 0:
            return INF_LEVEL
        if math.isinf(r):
            return 1
        return self.space.first_level_below(r, closed)

    def ball_measure_batch(self, ys, radii, closed: bool) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.int64)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), ys.shape)
        out = np.empty(ys.shape)
        for r in np.unique(radii):
            sel = radii == r
            if r == 0 and not closed:
                out[sel] = 0.0
            else:
                out[sel] = self.level_mass(ys[sel], self._threshold(float(r), closed))
        return out

    def r_alpha_level(self, ys, alpha: float) -> np.ndarray:
        """Level of ``r_alpha(x_n)``; ``INF_LEVEL`` stands for radius 0."""
        _check_alpha(alpha)
        ys = np.asarray(ys, dtype=np.int64)
        jmax = self.max_reaching_level(alpha)
        own_ok = reaches(self.atom_mass(ys), alpha)
        j = np.where(ys == 0, jmax, np.minimum(ys, jmax))
        return np.where(own_ok & (ys > 0), INF_LEVEL, j)

    @staticmethod
    def max_reaching_level(alpha: float) -> int:
        """Largest ``j`` with ``1/j >= alpha``."""
        j = int(math.floor(1.0 / (alpha * (1.0 - MASS_RTOL))))
        while j > 1 and not reaches(1.0 / j, alpha):
            j -= 1
        return max(j, 1)

    def _radius_of_level(self, lev):
        lev = np.asarray(lev, dtype=np.int64)
        zero = lev >= INF_LEVEL
        return np.where(zero, 0.0, np.asarray(self.space.radius(np.where(zero, 1, lev)), dtype=float))

    def r_alpha_batch(self, ys, alpha: float) -> np.ndarray:
        return self._radius_of_level(self.r_alpha_level(ys, alpha))

    def masses_at_distance(self, ys, x):
        ys = np.asarray(ys, dtype=np.int64)
        L = self.space.levels(ys, self.space.raw(x))
        same = L >= INF_LEVEL
        closed = self.level_mass(ys, L)
        open_ = np.where(same, 0.0, self.level_mass(ys, np.where(same, 1, L + 1)))
        return closed, open_

    def r_alpha_relation(self, ys, x, alpha):
        ys = np.asarray(ys, dtype=np.int64)
        J = self.r_alpha_level(ys, alpha)
        L = self.space.levels(ys, self.space.raw(x))
        sign = np.where(L > J, -1, np.where(L == J, 0, 1)).astype(np.int8)
        zero = J >= INF_LEVEL
        closed = self.level_mass(ys, J)
        open_ = np.where(zero, 0.0, self.level_mass(ys, np.where(zero, 1, J + 1)))
        return sign, open_, closed

    def atoms_for_D(self, x, alpha):
        """Atoms ``x_1..x_K`` where ``x_K`` carries the whole tail ``n >= K``.

        Past ``K = max(q, j_alpha) + 1`` every atom relates to ``x_q`` in the same
        way, so lumping the tail is exact.
        """
        q = self.space.raw(x)
        K = max(q, self.max_reaching_level(alpha)) + 1
        atoms = np.arange(1, K + 1, dtype=np.int64)
        w = self.atom_mass(atoms)
        w[-1] = 1.0 / K
        return atoms, w

    def integrate(self, f, n_terms: int = 1_000_000) -> float:
        """Sum over ``x_1..x_N`` plus the tail evaluated at ``x_0`` (error <= 1/N)."""
        atoms = np.arange(1, n_terms + 1, dtype=np.int64)
        head = float(np.dot(self.atom_mass(atoms), f(atoms)))
        return head + float(f(np.array([0]))[0]) / (n_terms + 1)


class BernoulliSeqModel(ProbabilityModel):
    """i.i.d. Bernoulli(p) bits truncated at ``depth`` positions.

    ``p = 1/2`` is the uniform measure on Cantor space. The closed ball of
    radius ``2**-i`` around ``y`` is the cylinder of its first ``i - 1`` bits.
    """

    def __init__(self, depth: int = 52, p: float = 0.5):
        if not 1 <= depth <= 52:
            raise ValueError("depth must lie in 1..52")
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        self.space = UltrametricSeq()
        self.depth = int(depth)
        self.p = float(p)

    def sample(self, rng, n: int) -> np.ndarray:
        rng = _rng(rng)
        if self.p == 0.5:
            return rng.integers(0, 2, size=(n, self.depth), dtype=np.uint8)
        return (rng.random((n, self.depth)) < self.p).astype(np.uint8)

    def prefix_masses(self, ys) -> np.ndarray:
        """``(n, depth + 1)`` array of cylinder masses ``P_0 .. P_depth``."""
        ys = np.asarray(ys, dtype=np.uint8).reshape(-1, self.depth)
        ones = np.zeros((len(ys), self.depth + 1), dtype=np.int64)
        ones[:, 1:] = np.cumsum(ys, axis=1)
        k = np.arange(self.depth + 1)
        return self.p ** ones * (1.0 - self.p) ** (k - ones)

    def _ones_count(self, ys) -> np.ndarray:
        ones = np.zeros((len(ys), self.depth + 1), dtype=np.int16)
        np.cumsum(ys, axis=1, dtype=np.int16, out=ones[:, 1:])
        return ones

    def _prefix_at(self, ys, k, ones=None) -> np.ndarray:
        """``P_k(y_i)`` for per-row ``k`` (clipped to ``0..depth``)."""
        ys = np.asarray(ys, dtype=np.uint8).reshape(-1, self.depth)
        if ones is None:
            ones = self._ones_count(ys)
        k = np.clip(np.asarray(k, dtype=np.int64), 0, self.depth)
        c = ones[np.arange(len(ys)), k].astype(np.int64)
        return self.p**c * (1.0 - self.p) ** (k - c)

    def _first_index(self, radii, closed: bool) -> np.ndarray:
        """Smallest ``i >= 1`` with ``2**-i <= r`` (closed) or ``< r`` (open)."""
        m, e = np.frexp(radii)
        i = 1 - e
        if not closed:
            i = np.where(m == 0.5, i + 1, i)
        return np.maximum(i, 1)

    def ball_measure_batch(self, ys, radii, closed: bool) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.uint8).reshape(-1, self.depth)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(ys),))
        pos = np.isfinite(radii) & (radii > 0)
        i = self._first_index(np.where(pos, radii, 1.0), closed)
        out = self._prefix_at(ys, i - 1)
        out = np.where(np.isinf(radii), 1.0, out)
        zero_val = self._prefix_at(ys, self.depth) if closed else 0.0
        return np.where(radii == 0, zero_val, out)

    def r_alpha_batch(self, ys, alpha: float) -> np.ndarray:
        _check_alpha(alpha)
        P = self.prefix_masses(ys)
        cnt = reaches(P, alpha).sum(axis=1)
        return np.where(cnt > self.depth, 0.0, np.ldexp(1.0, -cnt))

    def masses_at_distance(self, ys, x):
        # y agrees with x before the first differing position fd, so the
        # closed ball is x's cylinder of length fd - 1 and the open ball adds y_fd
        ys = np.asarray(ys, dtype=np.uint8).reshape(-1, self.depth)
        xr = self.space.raw(x)
        fd = self.space.first_diff(ys, xr)
        same = fd > self.depth
        closed = self.prefix_masses(xr)[0][fd - 1]
        bit = ys[np.arange(len(ys)), np.minimum(fd, self.depth) - 1]
        open_ = np.where(same, 0.0, closed * np.where(bit == 1, self.p, 1.0 - self.p))
        return closed, open_


class UniformCubeModel(ProbabilityModel):
    """Lebesgue measure on ``[0, 1]**d`` for ``d`` in {1, 2}, exact ball areas."""

    def __init__(self, d: int = 1):
        if d not in (1, 2):
            raise ValueError("UniformCubeModel supports d = 1 or 2")
        self.d = d
        self.space = Euclidean(d)

    def diameter(self) -> float:
        return math.sqrt(self.d)

    def sample(self, rng, n: int) -> np.ndarray:
        return _rng(rng).random((n, self.d))

    def ball_measure_batch(self, ys, radii, closed: bool) -> np.ndarray:
        ys = np.asarray(ys, dtype=float).reshape(-1, self.d)
        r = np.broadcast_to(np.asarray(radii, dtype=float), (len(ys),))
        if self.d == 1:
            x = ys[:, 0]
            return np.maximum(0.0, np.minimum(x + r, 1.0) - np.maximum(x - r, 0.0))
        return disk_square_area(ys[:, 0], ys[:, 1], r)

    def masses_at_distance(self, ys, x):
        # atomless: open and closed balls have equal mass
        m = self.ball_measure_batch(ys, self.space.distances_to(ys, x), True)
        return m, m

    def integrate(self, f) -> float:
        if self.d == 1:
            return integrate.quad(lambda t: float(f(np.array([[t]]))[0]), 0.0, 1.0, limit=200)[0]
        return integrate.dblquad(lambda v, u: float(f(np.array([[u, v]]))[0]), 0.0, 1.0, 0.0, 1.0)[0]


def _quadrant_area(a, b, r):
    """Area of the disk of radius ``r`` at the origin within ``[0, a] x [0, b]``."""
    a = np.minimum(a, r)
    b = np.minimum(b, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        xs = np.sqrt(np.maximum(r * r - b * b, 0.0))

        def S(x):
            ratio = np.clip(np.where(r > 0, x / np.where(r > 0, r, 1.0), 0.0), -1.0, 1.0)
            return 0.5 * (x * np.sqrt(np.maximum(r * r - x * x, 0.0)) + r * r * np.arcsin(ratio))

        outside = b * xs + S(a) - S(xs)
    return np.where(a * a + b * b <= r * r, a * b, outside)


def _signed_corner(a, b, r):
    return np.sign(a) * np.sign(b) * _quadrant_area(np.abs(a), np.abs(b), r)


def disk_square_area(cx, cy, r):
    """Area of ``disk((cx, cy), r) ∩ [0, 1]**2`` by inclusion-exclusion of corners."""
    cx, cy, r = np.broadcast_arrays(np.asarray(cx, float), np.asarray(cy, float), np.asarray(r, float))
    x0, x1 = -cx, 1.0 - cx
    y0, y1 = -cy, 1.0 - cy
    area = (
        _signed_corner(x1, y1, r)
        - _signed_corner(x0, y1, r)
        - _signed_corner(x1, y0, r)
        + _signed_corner(x0, y0, r)
    )
    return np.clip(area, 0.0, 1.0)


class GaussianMixtureModel(ProbabilityModel):
    """Mixture of isotropic Gaussians ``N(mean_c, sigma_c**2 I)`` with class labels."""

    def __init__(self, weights, means, sigmas, labels):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.sigmas = np.asarray(sigmas, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        c, d = self.means.shape
        if not (self.weights.shape == self.sigmas.shape == self.labels.shape == (c,)):
            raise ValueError("weights, sigmas and labels need one entry per component")
        if not math.isclose(self.weights.sum(), 1.0, rel_tol=1e-12) or np.any(self.sigmas <= 0):
            raise ValueError("invalid mixture parameters")
        self.d = d
        self.space = Euclidean(d)
        self._cache: dict = {}

    def sample(self, rng, n: int) -> np.ndarray:
        X, _ = self.sample_labeled(rng, n)
        return X

    def sample_labeled(self, rng, n: int):
        """Points and their component labels (the class ``Y``)."""
        rng = _rng(rng)
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        X = self.means[comp] + self.sigmas[comp, None] * rng.standard_normal((n, self.d))
        return X, self.labels[comp]

    def component_densities(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.d)
        sq = ((X[:, None, :] - self.means[None]) ** 2).sum(-1)
        s2 = self.sigmas**2
        return self.weights * np.exp(-0.5 * sq / s2) / (2 * np.pi * s2) ** (self.d / 2)

    def density(self, X) -> np.ndarray:
        return self.component_densities(X).sum(1)

    def posterior(self, X) -> np.ndarray:
        dens = self.component_densities(X)
        tot = dens.sum(1)
        one = dens[:, self.labels == 1].sum(1)
        return np.where(tot > 0, one / np.where(tot > 0, tot, 1.0), 0.5)

    def ball_measure_batch(self, ys, radii, closed: bool) -> np.ndarray:
        ys = np.asarray(ys, dtype=float).reshape(-1, self.d)
        r = np.broadcast_to(np.asarray(radii, dtype=float), (len(ys),))
        out = np.zeros(len(ys))
        for w, m, s in zip(self.weights, self.means, self.sigmas):
            nc = ((ys - m) ** 2).sum(1) / s**2
            t = r**2 / s**2
            central = stats.chi2.cdf(t, self.d)
            shifted = stats.ncx2.cdf(t, self.d, np.where(nc > 0, nc, 1.0))
            out += w * np.where(nc > 0, shifted, central)
        return out

    def integrate(self, f) -> float:
        span = 10.0 * self.sigmas.max()
        lo = self.means.min(0) - span
        hi = self.means.max(0) + span
        if self.d == 1:
            g = lambda t: float(f(np.array([[t]]))[0] * self.density([[t]])[0])
            return integrate.quad(g, lo[0], hi[0], limit=200)[0]
        if self.d == 2:
            g = lambda v, u: float(f(np.array([[u, v]]))[0] * self.density([[u, v]])[0])
            return integrate.dblquad(g, lo[0], hi[0], lo[1], hi[1], epsabs=1e-10)[0]
        raise NotImplementedError("quadrature only in dimensions 1 and 2")

    def bayes_error_quadrature(self, epsabs: float = 1e-7) -> float:
        """``∫ min(f_0, f_1)`` with ``f_c`` the weighted class densities (cached)."""
        key = ("bayes", epsabs)
        if key not in self._cache:
            self._cache[key] = self._bayes_quadrature(epsabs)
        return self._cache[key]

    def _bayes_quadrature(self, epsabs: float) -> float:
        comps = [
            (w / (2 * math.pi * s * s) ** (self.d / 2), m.tolist(), 0.5 / (s * s), int(c))
            for w, m, s, c in zip(self.weights, self.means, self.sigmas, self.labels)
        ]

        def g(*coords):
            x = coords[::-1]
            f = [0.0, 0.0]
            for scale, mean, inv, c in comps:
                sq = sum((a - b) ** 2 for a, b in zip(x, mean))
                f[c] += scale * math.exp(-inv * sq)
            return min(f)

        span = 8.0 * self.sigmas.max()
        lo = self.means.min(0) - span
        hi = self.means.max(0) + span
        if self.d == 1:
            return integrate.quad(g, lo[0], hi[0], epsabs=epsabs, limit=200)[0]
        if self.d == 2:
            return integrate.dblquad(g, lo[0], hi[0], lo[1], hi[1], epsabs=epsabs, epsrel=epsabs)[0]
        raise NotImplementedError("quadrature only in dimensions 1 and 2")


# ---------------------------------------------------------------------------
# Learning problems


@dataclass(frozen=True)
class LearningProblem:
    model: ProbabilityModel
    eta: Callable[[np.ndarray], np.ndarray]
    name: str = field(default="", compare=False)

    def eta_values(self, X) -> np.ndarray:
        v = np.asarray(self.eta(X), dtype=float)
        if np.any((v < 0) | (v > 1)):
            raise ValueError("eta must take values in [0, 1]")
        return v

    def sample_labeled(self, rng, n: int):
        """``n`` i.i.d. draws of ``(X, Y)``."""
        rng = _rng(rng)
        if isinstance(self.model, GaussianMixtureModel) and self.name == "posterior":
            return self.model.sample_labeled(rng, n)
        X = self.model.sample(rng, n)
        Y = (rng.random(n) < self.eta_values(X)).astype(np.int8)
        return X, Y


def constant_eta(value: float):
    if not 0 <= value <= 1:
        raise ValueError("constant eta must lie in [0, 1]")
    return lambda X: np.full(len(X), float(value))


def coordinate_eta(X):
    """``eta(x) = x_1`` clipped to ``[0, 1]``."""
    return np.clip(np.asarray(X, dtype=float).reshape(len(X), -1)[:, 0], 0.0, 1.0)


def parity_eta(X):
    """``eta(x_n) = 1`` for even ``n`` (the limit point counts as even)."""
    return (np.asarray(X, dtype=np.int64) % 2 == 0).astype(float)


def gaussian_problem(model: GaussianMixtureModel) -> LearningProblem:
    return LearningProblem(model, model.posterior, name="posterior")


def bayes_error(problem: LearningProblem, method: str = "quadrature", M: int = 100_000, rng=None):
    """``E min(eta, 1 - eta)``.

    ``method="quadrature"`` integrates exactly or numerically; ``"mc"`` returns
    ``(estimate, standard_error)`` from ``M`` draws.
    """
    f = lambda X: np.minimum(problem.eta_values(X), 1.0 - problem.eta_values(X))
    if method == "quadrature":
        if isinstance(problem.model, GaussianMixtureModel) and problem.name == "posterior":
            return problem.model.bayes_error_quadrature()
        return problem.model.integrate(f)
    if method == "mc":
        vals = f(problem.model.sample(_rng(rng), M))
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M))
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Extended domain


@dataclass(frozen=True)
class ExtendedPoint:
    x: object
    z: float

    def __post_init__(self):
        if not 0 <= self.z <= 1:
            raise ValueError("z must lie in [0, 1]")


def ball_measure(model: ProbabilityModel, x, r: float, closed: bool = True) -> float:
    return model.ball_measure(x, r, closed)


def r_alpha(model: ProbabilityModel, x, alpha: float) -> float:
    return model.r_alpha(x, alpha)


def band_length(z, b):
    """``λ(N(z, b) ∩ [0, 1])``."""
    return np.minimum(np.asarray(z) + b, 1.0) - np.maximum(np.asarray(z) - b, 0.0)


def extended_ball_measure(model: ProbabilityModel, x, z: float, r: float, b: float) -> float:
    if r < 0 or b < 0 or not 0 <= z <= 1:
        raise ValueError("need r >= 0, b >= 0 and z in [0, 1]")
    inner = model.ball_measure(x, r, closed=False)
    sphere = model.ball_measure(x, r, closed=True) - inner
    return float(inner + sphere * band_length(z, b))


def b_half_from_masses(open_mass, closed_mass, alpha):
    """``b_alpha(y, 1/2)`` from ``mu(B(y, r_alpha))`` and ``mu(B̄(y, r_alpha))``."""
    open_mass = np.asarray(open_mass, dtype=float)
    sphere = np.asarray(closed_mass, dtype=float) - open_mass
    null = sphere <= MASS_RTOL * alpha
    exceeds = np.asarray(closed_mass) * (1.0 - MASS_RTOL) > alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        split = np.clip((alpha - open_mass) / (2.0 * sphere), 0.0, 0.5)
    return np.where(null, 0.0, np.where(exceeds, split, 0.5))


def b_from_half(c, z):
    """Widen the band near the ends of ``[0, 1]`` so it keeps length ``2c``."""
    c = np.asarray(c, dtype=float)
    z = np.asarray(z, dtype=float)
    edge = np.minimum(z, 1.0 - z)
    return np.where(edge >= c, c, 2.0 * c - edge)


def b_alpha(model: ProbabilityModel, x, z: float, alpha: float) -> float:
    _check_alpha(alpha, upper_open=True)
    if not 0 <= z <= 1:
        raise ValueError("z must lie in [0, 1]")
    r = model.r_alpha(x, alpha)
    open_mass = model.ball_measure(x, r, closed=False)
    closed_mass = model.ball_measure(x, r, closed=True)
    return float(b_from_half(b_half_from_masses(open_mass, closed_mass, alpha), z))


def band_hit_measure(z: float, c):
    """``λ{w ∈ [0, 1] : |z - w| <= b(w)}`` where ``b`` is built from half-width ``c``."""
    c = np.asarray(c, dtype=float)
    middle = np.maximum(0.0, np.minimum(z + c, 1.0 - c) - np.maximum(z - c, c))
    left = np.where(z <= 2.0 * c, c, 0.0)
    right = np.where(1.0 - z <= 2.0 * c, c, 0.0)
    return np.where(c > 0, middle + left + right, 0.0)


def _relations(model, ys, x, alpha, method):
    if method == "rank":
        # d < r_alpha(y)  iff  mu(B̄(y, d)) < alpha
        # d = r_alpha(y)  iff  mu(B(y, d)) < alpha <= mu(B̄(y, d))
        closed, open_ = model.masses_at_distance(ys, x)
        less = ~reaches(closed, alpha)
        equal = ~less & ~reaches(open_, alpha)
        return less, equal, open_, closed
    if method == "radius":
        sign, open_, closed = model.r_alpha_relation(ys, x, alpha)
        return sign < 0, sign == 0, open_, closed
    raise ValueError(f"unknown method {method!r}")


def D_membership(model, ys, ws, x, z, alpha, method="rank") -> np.ndarray:
    """Whether each ``(y_i, w_i)`` lies in ``D(x, z, alpha)``."""
    less, equal, open_, closed = _relations(model, ys, x, alpha, method)
    c = b_half_from_masses(open_, closed, alpha)
    ws = np.asarray(ws, dtype=float)
    inband = np.abs(z - ws) <= b_from_half(c, ws)
    return less | (equal & inband)


def D_measure_estimate(model, x, z: float, alpha: float, M: int = 100_000, rng=None, method="rank"):
    """Monte-Carlo ``(mu ⊗ λ)(D(x, z, alpha))`` as ``(estimate, standard_error)``."""
    _check_alpha(alpha, upper_open=True)
    rng = _rng(rng)
    ys = model.sample(rng, M)
    ws = rng.random(M)
    hit = D_membership(model, ys, ws, x, z, alpha, method)
    p = float(hit.mean())
    return p, math.sqrt(p * (1 - p) / M)


def D_measure_exact(model, x, z: float, alpha: float, method="rank") -> float:
    """Exact ``(mu ⊗ λ)(D(x, z, alpha))`` for models with enumerable atoms."""
    _check_alpha(alpha, upper_open=True)
    atoms, weights = model.atoms_for_D(x, alpha)
    less, equal, open_, closed = _relations(model, atoms, x, alpha, method)
    c = b_half_from_masses(open_, closed, alpha)
    per_atom = np.where(less, 1.0, np.where(equal, band_hit_measure(z, c), 0.0))
    return math.fsum(weights * per_atom)


def rational_alpha(alpha) -> Fraction:
    """The small-denominator rational a float ``alpha`` stands for."""
    return Fraction(alpha).limit_denominator(10**12)


def nested_D_lower_bound(alpha: float) -> tuple[float, float]:
    """``alpha * sum_{n = ceil(alpha**-1/2)}^{floor(1/alpha) - 1} 1/n`` and ``-(2/15) alpha ln alpha``."""
    a = rational_alpha(alpha)
    if not 0 < a < 1:
        raise ValueError("alpha must lie in (0, 1)")
    inv = 1 / a
    lo = math.isqrt(math.ceil(inv))
    while lo * lo < inv:
        lo += 1
    while lo > 1 and (lo - 1) ** 2 >= inv:
        lo -= 1
    hi = math.floor(inv) - 1
    if lo > hi:
        raise ValueError(f"alpha={alpha} too large: empty index range {lo}..{hi}")
    total = math.fsum(1.0 / n for n in range(lo, hi + 1))
    return float(a) * total, -(2.0 / 15.0) * alpha * math.log(alpha)


def dgkl_upper_bound(alpha: float) -> float:
    return 4.0 * alpha * (1.0 - math.log(alpha))
