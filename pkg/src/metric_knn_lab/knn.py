"""k-nearest-neighbor rule with explicit tie-breaking.

The neighbor set ``N_k(x)`` holds every sample point strictly closer than
``r_knn(x)`` and fills the remaining slots from the sphere of radius
``r_knn(x)``. Which tied points are taken depends on the policy:

* ``BY_INDEX``: lowest sample index first
* ``UNIFORM_RANDOM``: smallest tie-break value ``z_i`` first
* ``DGKL``: smallest ``|z_i - z|`` first, ``z`` being the query's own value

The vote is ``1`` when at least half the neighbors carry label 1.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .measure_models import (
    LearningProblem,
    ProbabilityModel,
    b_alpha,
    _rng,
)
from .metric_core import Euclidean, MetricSpace


class TieBreakPolicy(enum.Enum):
    BY_INDEX = "by-index"
    UNIFORM_RANDOM = "uniform-random"
    DGKL = "dgkl"


@dataclass(frozen=True)
class LabeledPoint:
    x: object
    y: int
    z: float

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if not 0 <= self.z <= 1:
            raise ValueError("z must lie in [0, 1]")


class LabeledSample:
    """Points (a batch in the space's array form), labels and tie-break values.

    Identity is positional: repeated points are distinct sample members.
    """

    def __init__(self, space: MetricSpace, X, y, z):
        self.space = space
        self.X = np.asarray(X)
        self.y = np.asarray(y, dtype=np.int8)
        self.z = np.asarray(z, dtype=float)
        n = len(self.X)
        if self.y.shape != (n,) or self.z.shape != (n,):
            raise ValueError("X, y and z must have equal length")
        if np.any((self.y != 0) & (self.y != 1)):
            raise ValueError("labels must be 0 or 1")
        if np.any((self.z < 0) | (self.z > 1)):
            raise ValueError("z values must lie in [0, 1]")
        for a in (self.X, self.y, self.z):
            a.setflags(write=False)

    @classmethod
    def from_points(cls, space: MetricSpace, points: Sequence[LabeledPoint]) -> "LabeledSample":
        X = space.as_batch([p.x for p in points])
        return cls(space, X, [p.y for p in points], [p.z for p in points])

    @classmethod
    def draw(cls, problem: LearningProblem, n: int, rng) -> "LabeledSample":
        """``n`` labeled draws with independent uniform tie-break values."""
        rng = _rng(rng)
        X, y = problem.sample_labeled(rng, n)
        return cls(problem.model.space, X, y, rng.random(n))

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, i: int) -> LabeledPoint:
        return LabeledPoint(self.space.point_at(self.X, i), int(self.y[i]), float(self.z[i]))

    def prefix(self, n: int) -> "LabeledSample":
        return LabeledSample(self.space, self.X[:n], self.y[:n], self.z[:n])

    def to_csv(self, path) -> None:
        X = self.X.reshape(len(self), -1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{j}" for j in range(X.shape[1])] + ["y", "z"])
            for row, label, z in zip(X, self.y, self.z):
                w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row.tolist()] + [int(label), format(z, ".17g")])


@dataclass(frozen=True)
class NeighborSet:
    indices: tuple
    radius: float


def _check_k(sample: LabeledSample, k: int) -> None:
    if not 1 <= k <= len(sample):
        raise ValueError(f"k={k} out of range for a sample of size {len(sample)}")


def r_knn(sample: LabeledSample, x, k: int) -> float:
    """Smallest ``r`` whose closed ball around ``x`` holds at least ``k`` sample points."""
    _check_k(sample, k)
    keys = sample.space.distance_keys(sample.X, x)
    j = np.argpartition(keys, k - 1)[k - 1]
    return float(sample.space.distances_to(sample.X[j : j + 1], x)[0])


def _tie_values(sample: LabeledSample, policy: TieBreakPolicy, query_z) -> np.ndarray:
    if policy is TieBreakPolicy.BY_INDEX:
        return np.zeros((1, len(sample)))
    if policy is TieBreakPolicy.UNIFORM_RANDOM:
        return sample.z[None, :]
    if policy is TieBreakPolicy.DGKL:
        qz = np.atleast_1d(np.asarray(query_z, dtype=float))
        return np.abs(sample.z[None, :] - qz[:, None])
    raise ValueError(f"unknown policy {policy!r}")


def select_neighbors(sample: LabeledSample, x, k: int, policy=TieBreakPolicy.BY_INDEX, query_z: float = 0.0) -> NeighborSet:
    _check_k(sample, k)
    policy = TieBreakPolicy(policy)
    keys = sample.space.distance_keys(sample.X, x)[None, :]
    idx = _kernels.knn_select(keys, _tie_values(sample, policy, query_z), k)[0]
    radius = float(sample.space.distances_to(sample.X[idx[-1] : idx[-1] + 1], x)[0])
    return NeighborSet(tuple(int(i) for i in idx), radius)


def vote(labels) -> int:
    labels = np.asarray(labels)
    return int(2 * int(labels.sum()) >= len(labels))


def predict(sample, x, k, policy=TieBreakPolicy.BY_INDEX, query_z: float = 0.0) -> int:
    nb = select_neighbors(sample, x, k, policy, query_z)
    return vote(sample.y[list(nb.indices)])


def eta_n(sample, x, k, policy=TieBreakPolicy.BY_INDEX, query_z: float = 0.0) -> float:
    nb = select_neighbors(sample, x, k, policy, query_z)
    return float(sample.y[list(nb.indices)].mean())


def key_matrix(space: MetricSpace, queries, X, chunk: int = 256) -> np.ndarray:
    """Distance keys ``(n_queries, n)`` from each query row to each sample row."""
    queries = np.asarray(queries)
    if isinstance(space, Euclidean):
        Q = queries.reshape(-1, space.d)
        X = np.asarray(X, dtype=float).reshape(-1, space.d)
        out = np.empty((len(Q), len(X)))
        for s in range(0, len(Q), chunk):
            diff = Q[s : s + chunk, None, :] - X[None, :, :]
            out[s : s + chunk] = np.einsum("qnd,qnd->qn", diff, diff)
        return out
    return np.stack([space.distance_keys(X, q) for q in queries])


def neighbors_batch(sample, queries, k, policy=TieBreakPolicy.BY_INDEX, query_z=None) -> np.ndarray:
    """Neighbor indices ``(n_queries, k)`` in selection order."""
    _check_k(sample, k)
    policy = TieBreakPolicy(policy)
    queries = np.asarray(queries)
    if query_z is None:
        query_z = np.zeros(len(queries))
    keys = key_matrix(sample.space, queries, sample.X)
    return _kernels.knn_select(keys, _tie_values(sample, policy, query_z), k)


def predict_batch(sample, queries, k, policy=TieBreakPolicy.BY_INDEX, query_z=None) -> np.ndarray:
    idx = neighbors_batch(sample, queries, k, policy, query_z)
    ones = sample.y[idx].sum(axis=1).astype(np.int64)
    return (2 * ones >= k).astype(np.int8)


def eta_n_batch(sample, queries, k, policy=TieBreakPolicy.BY_INDEX, query_z=None) -> np.ndarray:
    idx = neighbors_batch(sample, queries, k, policy, query_z)
    return sample.y[idx].mean(axis=1)


def eta_star_n(sample: LabeledSample, model: ProbabilityModel, x, k: int) -> float:
    """``(1/k) * sum_i 1{d(X_i, x) < r_{k/n}(x)} Y_i`` (not clamped to [0, 1])."""
    _check_k(sample, k)
    r = model.r_alpha(x, k / len(sample))
    inside = sample.space.compare_radius(sample.X, x, r) < 0
    return float(sample.y[inside].sum()) / k


def eta_star_extended(sample: LabeledSample, model: ProbabilityModel, x, z: float, k: int) -> float:
    """Extended-domain version: points on the sphere count when ``|z_i - z| <= b_{k/n}(x, z)``."""
    _check_k(sample, k)
    if not 0 <= z <= 1:
        raise ValueError("z must lie in [0, 1]")
    alpha = k / len(sample)
    r = model.r_alpha(x, alpha)
    b = b_alpha(model, x, z, alpha) if alpha < 1 else 1.0
    cmp = sample.space.compare_radius(sample.X, x, r)
    member = (cmp < 0) | ((cmp == 0) & (np.abs(sample.z - z) <= b))
    return float(sample.y[member].sum()) / k


def inside_count_fraction(sample: LabeledSample, model: ProbabilityModel, x, k: int) -> float:
    """``(1/k) #{i : d(X_i, x) < r_{k/n}(x)}``, the all-ones version of ``eta_star_n``."""
    r = model.r_alpha(x, k / len(sample))
    return float(np.count_nonzero(sample.space.compare_radius(sample.X, x, r) < 0)) / k
