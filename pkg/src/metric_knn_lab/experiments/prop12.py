"""Simulation of the one-atom problem where k-NN fails to be strongly consistent.

All sample points coincide, every label is Bernoulli(p), and ties are broken
by the smallest uniform values ``Z_i``. At checkpoint ``i`` the rule uses the
``k_i = ceil(ln i)`` smallest ``Z`` among the first ``n_i``. The checkpoints
grow like ``2**(i**2 / 2)``, so instead of drawing ``n_i`` uniforms each path
draws, for every block ``(n_{i-1}, n_i]``, only its ``K`` smallest values from
the exact joint law of uniform order statistics:
``U_(j) = G_j / G_{m+1}`` with ``G`` the partial sums of unit exponentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .parallel import run_trials
from .schedules import CounterexampleSchedule

EXACT_GAMMA_LIMIT = 10**15


def block_sizes(schedule: CounterexampleSchedule) -> list[int]:
    ns = [cp.n for cp in schedule.checkpoints]
    return [b - a for a, b in zip([0] + ns[:-1], ns)]


def draw_block_minima(rng: np.random.Generator, sizes: list[int], K: int) -> np.ndarray:
    """``(len(sizes), K)`` array of ``log`` of the ``K`` smallest uniforms per block.

    Blocks with fewer than ``K`` members are padded with ``+inf``.
    """
    B = len(sizes)
    G = np.cumsum(rng.standard_exponential((B, K + 1)), axis=1)
    small = np.array([m <= EXACT_GAMMA_LIMIT for m in sizes])
    # block sizes can exceed the float range, so the huge branch works with log(m')
    rest = np.array([float(max(m + 1 - K, 1)) if ok else 1.0 for m, ok in zip(sizes, small)])
    gam = rng.gamma(rest)
    gauss = rng.standard_normal(B)
    log_total = np.empty(B)
    for b, m in enumerate(sizes):
        if m <= K:
            log_total[b] = math.log(G[b, m])
        elif small[b]:
            log_total[b] = math.log(G[b, K - 1] + gam[b])
        else:
            # Gamma(m') = m' (1 + N / sqrt(m')) to relative order 1/m'
            log_rest = math.log(m + 1 - K)
            log_total[b] = log_rest + gauss[b] * math.exp(-0.5 * log_rest)
    out = np.log(G[:, :K]) - log_total[:, None]
    cols = np.arange(K)[None, :]
    return np.where(cols < np.array(sizes)[:, None], out, np.inf)


def select_from_blocks(block_logz: np.ndarray, upto: int, k: int):
    """Identities (``block * K + rank``) and values of the ``k`` smallest in blocks ``0..upto``.

    ``block_logz`` has shape ``(..., B, K)``; the result is ordered by value.
    """
    K = block_logz.shape[-1]
    flat = block_logz[..., : upto + 1, :].reshape(*block_logz.shape[:-2], (upto + 1) * K)
    order = np.argsort(flat, axis=-1, kind="stable")[..., :k]
    return order, np.take_along_axis(flat, order, axis=-1)


@dataclass
class Prop12Report:
    rows: list
    summary: dict = field(default_factory=dict)

    @property
    def violations(self) -> list[str]:
        out = []
        if self.summary.get("disjoint_failures", 0):
            out.append("neighbor sets overlapped on a path where both bands held")
        return out


def prop12_counterexample(p: float = math.exp(-1), schedule=None, horizon: int = 30, trials: int = 10_000, seed: int = 0, threads=1) -> Prop12Report:
    if not 0 < p < 1 or p == 0.5:
        raise ValueError("p must lie in (0, 1) and differ from 1/2")
    sched = schedule if schedule is not None else CounterexampleSchedule(horizon)
    cps = sched.checkpoints
    sizes = block_sizes(sched)
    K = max(cp.k for cp in cps)
    wrong_label = 1 if p < 0.5 else 0

    def one(t, rng):
        logz = draw_block_minima(rng, sizes, K)
        labels = (rng.random((len(sizes), K)) < p).astype(np.int8)
        return logz, labels

    draws = run_trials(one, seed, trials, threads)
    logz = np.stack([d[0] for d in draws])
    labels = np.stack([d[1] for d in draws]).reshape(trials, -1)

    ids, band, wrong = [], [], []
    for b, cp in enumerate(cps):
        sel, vals = select_from_blocks(logz, b, cp.k)
        lo, hi = sched.band(cp.i)
        ids.append(sel)
        band.append((vals[:, -1] < hi) & (vals[:, 0] >= lo))
        wrong.append(np.all(np.take_along_axis(labels, sel, axis=1) == wrong_label, axis=1))

    pair_count = 0
    pair_fail = 0
    for a in range(len(cps)):
        for c in range(a + 1, len(cps)):
            both = band[a] & band[c]
            if not both.any():
                continue
            overlap = (ids[a][both][:, :, None] == ids[c][both][:, None, :]).any(axis=(1, 2))
            pair_count += int(both.sum())
            pair_fail += int(overlap.sum())

    q = min(p, 1 - p)
    rows = []
    partial = 0.0
    for b, cp in enumerate(cps):
        expected = q**cp.k
        freq = float(wrong[b].mean())
        sigma = math.sqrt(expected * (1 - expected) / trials)
        partial += expected
        nxt = b + 1 < len(cps)
        consecutive = band[b] & band[b + 1] if nxt else np.zeros(trials, bool)
        disjoint = (
            ~(ids[b][consecutive][:, :, None] == ids[b + 1][consecutive][:, None, :]).any(axis=(1, 2))
            if nxt
            else np.zeros(0, bool)
        )
        certified_band = 1.0 - float(cp.tail_few) - (1.0 - float(cp.none_below_next))
        rows.append(
            {
                "i": cp.i,
                "k": cp.k,
                "log2_n": math.log2(cp.n),
                "log_eps": cp.log_eps,
                "band_freq": float(band[b].mean()),
                "band_certified": certified_band,
                "wrong_freq": freq,
                "wrong_expected": expected,
                "wrong_sigma": sigma,
                "wrong_within_3sigma": int(abs(freq - expected) <= 3 * sigma),
                "consecutive_band_paths": int(consecutive.sum()),
                "consecutive_disjoint": int(disjoint.sum()),
                "partial_sum": partial,
                "harmonic_reference": math.exp(-1) * (_harmonic(cp.i) - 1.0),
            }
        )
    summary = {
        "trials": trials,
        "horizon": cps[-1].i,
        "p": p,
        "band_pairs_checked": pair_count,
        "disjoint_failures": pair_fail,
        "checkpoints_outside_3sigma": sum(1 - r["wrong_within_3sigma"] for r in rows),
        "partial_sum": partial,
        "harmonic_reference": rows[-1]["harmonic_reference"],
    }
    return Prop12Report(rows, summary)


def _harmonic(n: int) -> float:
    return math.fsum(1.0 / j for j in range(1, n + 1))
