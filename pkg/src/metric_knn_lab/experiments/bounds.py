"""Sweeps comparing measured quantities with their bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..knn import LabeledSample, TieBreakPolicy, eta_n_batch
from ..measure_models import (
    DiscreteModel,
    LearningProblem,
    NestedBallModel,
    UniformCubeModel,
    D_measure_estimate,
    D_measure_exact,
    dgkl_upper_bound,
    nested_D_lower_bound,
)
from .parallel import run_trials, trial_rng

# ---------------------------------------------------------------------------
# ball averages of eta


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
NESTED_TERMS = 1 << 20


def _interval_average(eta, xs, r):
    a = np.maximum(xs - r, 0.0)
    b = np.minimum(xs + r, 1.0)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = eta(nodes.reshape(-1, 1)).reshape(nodes.shape)
    return 0.5 * (vals * _GL_WEIGHTS).sum(axis=1)


def _nested_average(model: NestedBallModel, eta, xs, r):
    """Closed-ball averages; the ball past level ``j`` is summed to ``j + 2**20`` terms.

    The remaining mass ``1/(N+1)`` takes the average of ``eta`` over the last
    half of the summed window.
    """
    j = model.space.first_level_below(r, closed=True)
    N = j + NESTED_TERMS
    atoms = np.arange(j, N + 1, dtype=np.int64)
    w = model.atom_mass(atoms)
    vals = eta(atoms)
    half = atoms > (j + N) // 2
    tail = np.dot(w[half], vals[half]) / w[half].sum()
    spread = (np.dot(w, vals) + tail / (N + 1)) * j
    xs = np.asarray(xs, dtype=np.int64)
    return np.where((xs == 0) | (xs >= j), spread, eta(xs))


def ball_average(model, eta, xs, r: float, reference: Optional[np.ndarray] = None) -> np.ndarray:
    """``(1/mu(B̄(x, r))) * integral of eta over B̄(x, r)`` for each row of ``xs``."""
    if isinstance(model, UniformCubeModel) and model.d == 1:
        return _interval_average(eta, np.asarray(xs, float).reshape(-1), r)
    if isinstance(model, NestedBallModel):
        return _nested_average(model, eta, xs, r)
    pts = model.atoms if isinstance(model, DiscreteModel) else reference
    w = model.weights if isinstance(model, DiscreteModel) else np.full(len(pts), 1.0 / len(pts))
    vals = eta(pts)
    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        inside = model.space.compare_radius(pts, x, r) <= 0
        out[i] = np.dot(w[inside], vals[inside]) / w[inside].sum()
    return out


def lb_differentiation_check(problem: LearningProblem, r_grid, epsilon: float, M: int = 2000, seed: int = 0, reference_size: int = 20_000) -> list[dict]:
    """``mu{x : |ball average of eta at radius r - eta(x)| > epsilon}`` for each ``r``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    r_grid = [float(r) for r in r_grid]
    if any(b >= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r_grid must be decreasing")
    rng = trial_rng(seed, 0)
    model = problem.model
    xs = model.sample(rng, M)
    exact_oracle = isinstance(model, (DiscreteModel, NestedBallModel)) or (isinstance(model, UniformCubeModel) and model.d == 1)
    reference = None if exact_oracle else model.sample(trial_rng(seed, 1), reference_size)
    eta_x = problem.eta_values(xs)
    rows = []
    for r in r_grid:
        avg = ball_average(model, problem.eta_values, xs, r, reference)
        dev = np.abs(avg - eta_x) > epsilon
        p = float(dev.mean())
        rows.append({"r": r, "deviation_measure": p, "stderr": math.sqrt(p * (1 - p) / M), "exact_oracle": int(exact_oracle)})
    return rows


# ---------------------------------------------------------------------------
# D(x, z, alpha) sweep


def dgkl_bound_sweep(model, alpha_grid, points: int = 20, M: int = 100_000, seed: int = 0, method: str = "rank", threads=1) -> list[dict]:
    """Largest and mean D-measure over ``points`` random ``(x, z)`` per alpha.

    On ultrametric spaces every estimate is checked against
    ``4 alpha (1 - ln alpha)`` with a 3-sigma margin. On the nested-ball model
    the exact D-measure at the limit point and the harmonic lower bound are
    added.
    """
    alphas = [float(a) for a in alpha_grid]
    if any(not 0 < a < 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1)")
    rng = trial_rng(seed, 0)
    xs = model.sample(rng, points)
    zs = rng.random(points)
    ultra = model.space.is_ultrametric
    nested = isinstance(model, NestedBallModel)

    def one(t, _):
        a_idx, p_idx = divmod(t, points)
        return D_measure_estimate(model, xs[p_idx], float(zs[p_idx]), alphas[a_idx], M, trial_rng(seed, 1, a_idx, p_idx), method)

    est = run_trials(one, seed, len(alphas) * points, threads)
    rows = []
    for a_idx, a in enumerate(alphas):
        vals = np.array([e[0] for e in est[a_idx * points : (a_idx + 1) * points]])
        ses = np.array([e[1] for e in est[a_idx * points : (a_idx + 1) * points]])
        bound = dgkl_upper_bound(a)
        top = int(np.argmax(vals))
        row = {
            "alpha": a,
            "d_measure": float(vals[top]),
            "stderr": float(ses[top]),
            "d_mean": float(vals.mean()),
            "bound_4a": bound,
            "violations": int(np.sum(vals > bound + 3 * ses)) if ultra else 0,
            "ratio": float(vals[top] / a),
            "exact_lower": float("nan"),
            "exact_d_limit": float("nan"),
            "exact_ratio": float("nan"),
        }
        if nested:
            try:
                row["exact_lower"] = nested_D_lower_bound(a)[0]
            except ValueError:
                pass
            exact = D_measure_exact(model, 0, 0.0, a)
            row["exact_d_limit"] = exact
            row["exact_ratio"] = exact / a
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# concentration of the conditional L1 error


@dataclass(frozen=True)
class RegionSpec:
    contains: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    measure: float
    name: str = "Q"

    def __post_init__(self):
        if not self.measure > 0:
            raise ValueError("region must have positive measure")


def whole_space(model) -> RegionSpec:
    return RegionSpec(lambda X: np.ones(len(X), dtype=bool), 1.0, "whole space")


def concentration_bound(n: int, eps: float, mu_q: float, beta: float) -> float:
    return 4.0 * math.exp(-n * eps**2 * mu_q**2 / (18.0 * (beta + 1.0) ** 2))


def deviation_concentration(problem: LearningProblem, region: RegionSpec, n: int, k: int, trials: int, beta: float, eps_grid=(0.1, 0.2, 0.3), M_eval: int = 2000, seed: int = 0, policy=TieBreakPolicy.BY_INDEX, threads=1) -> list[dict]:
    """Tail ``P(E{|eta - eta_n| | X in Q} > eps)`` over trials against the exponential bound."""
    policy = TieBreakPolicy(policy)

    def one(t, rng):
        sample = LabeledSample.draw(problem, n, rng)
        X = problem.model.sample(rng, M_eval)
        X = X[region.contains(X)]
        if len(X) == 0:
            return float("nan")
        Z = rng.random(len(X))
        return float(np.mean(np.abs(problem.eta_values(X) - eta_n_batch(sample, X, k, policy, Z))))

    devs = np.array(run_trials(one, seed, trials, threads))
    rows = []
    for eps in eps_grid:
        tail = float(np.mean(devs > eps))
        sigma = math.sqrt(tail * (1 - tail) / trials)
        bound = concentration_bound(n, eps, region.measure, beta)
        rows.append(
            {
                "eps": eps,
                "tail": tail,
                "stderr": sigma,
                "bound": bound,
                "vacuous": int(bound >= 1),
                "pass": int(tail <= bound + 3 * sigma),
                "mean_deviation": float(np.nanmean(devs)),
            }
        )
    return rows
