"""Error curves of the k-NN rule: averaged over trials and along one sample path."""

from __future__ import annotations

import math

import numpy as np

from ..knn import LabeledSample, TieBreakPolicy, predict_batch
from ..measure_models import DiscreteModel, LearningProblem, bayes_error
from .parallel import run_trials, trial_rng


def reference_bayes_error(problem: LearningProblem, seed: int = 0) -> float:
    try:
        return float(bayes_error(problem, "quadrature"))
    except NotImplementedError:
        return bayes_error(problem, "mc", M=200_000, rng=trial_rng(seed, 0, 99))[0]


def _test_error(sample, problem, k, policy, X, Y, Z) -> float:
    pred = predict_batch(sample, X, k, policy, Z)
    return float(np.mean(pred != Y))


def weak_consistency_run(problem: LearningProblem, schedule, n_grid, test_size: int = 1000, trials: int = 20, policy=TieBreakPolicy.BY_INDEX, seed: int = 0, threads=1) -> list[dict]:
    """Mean test error over trials at each sample size, next to the Bayes error."""
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be nonempty and increasing")
    if test_size < 1 or trials < 1:
        raise ValueError("test_size and trials must be >= 1")
    policy = TieBreakPolicy(policy)

    def one(t, rng):
        train = LabeledSample.draw(problem, n_grid[-1], rng)
        X, Y = problem.sample_labeled(rng, test_size)
        Z = rng.random(test_size)
        return [_test_error(train.prefix(n), problem, schedule(n), policy, X, Y, Z) for n in n_grid]

    errs = np.array(run_trials(one, seed, trials, threads))
    bayes = reference_bayes_error(problem, seed)
    rows = []
    for j, n in enumerate(n_grid):
        col = errs[:, j]
        se = float(col.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
        rows.append({"n": n, "k": schedule(n), "mean_error": float(col.mean()), "stderr": se, "bayes_error": bayes})
    return rows


def exact_error(sample, problem: LearningProblem, k: int, policy) -> float:
    """Exact error of the current rule for problems with finitely many atoms."""
    model = problem.model
    pred = predict_batch(sample, model.atoms, k, policy)
    eta = problem.eta_values(model.atoms)
    return float(np.dot(model.weights, np.where(pred == 1, 1.0 - eta, eta)))


def log_grid(n_max: int, points: int = 20) -> list[int]:
    return sorted({int(round(v)) for v in np.logspace(0, math.log10(n_max), points)})


def strong_consistency_path(problem: LearningProblem, schedule, n_max: int, policy=TieBreakPolicy.BY_INDEX, path_seed: int = 0, test_size: int = 2000, points: int = 20) -> list[dict]:
    """Error of the rule trained on growing prefixes of a single labeled path."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    policy = TieBreakPolicy(policy)
    rng = trial_rng(path_seed, 0)
    path = LabeledSample.draw(problem, n_max, rng)
    exact = isinstance(problem.model, DiscreteModel) and policy is not TieBreakPolicy.DGKL
    if not exact:
        X, Y = problem.sample_labeled(rng, test_size)
        Z = rng.random(test_size)
    rows = []
    for n in log_grid(n_max, points):
        k = schedule(n)
        prefix = path.prefix(n)
        err = exact_error(prefix, problem, k, policy) if exact else _test_error(prefix, problem, k, policy, X, Y, Z)
        rows.append({"n": n, "k": k, "error": err, "exact": int(exact)})
    return rows
