"""Neighbor-count schedules, including the certified counterexample schedule.

``CounterexampleSchedule`` picks checkpoints ``n_i`` and band edges ``eps_i``
for the one-atom problem so that, with probability above ``1 - delta_i``, at
least ``ceil(ln i)`` of the tie-break values ``Z_1..Z_{n_i}`` fall in
``[0, eps_i)`` and none falls in ``[0, eps_{i+1})``. The ``ceil(ln i)``
smallest values then sit in ``[eps_{i+1}, eps_i)``, a different interval for
each checkpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath

TAIL_SPLIT = 3
SEARCH_BITS = 40


@dataclass(frozen=True)
class Schedule:
    name: str
    k_of_n: Callable[[int], int] = field(compare=False)

    def __call__(self, n: int) -> int:
        return self.k_of_n(n)


def sqrt_schedule() -> Schedule:
    return Schedule("sqrt", lambda n: max(1, math.isqrt(n - 1) + 1) if n > 0 else 1)


def log_schedule() -> Schedule:
    # ceil(ln 1) = 0, so the count is floored at one neighbor
    return Schedule("log", lambda n: max(1, math.ceil(math.log(n))))


def checkpoint_k(i: int) -> int:
    return math.ceil(math.log(i))


def _workdps(n: int) -> int:
    return int(math.log10(max(n, 10))) + 40


def binom_lower_tail(n: int, eps, k: int):
    """``P(Bin(n, eps) < k)`` by direct summation at adaptive precision."""
    with mpmath.workdps(_workdps(n)):
        eps = mpmath.mpf(eps)
        q = 1 - eps
        total = mpmath.mpf(0)
        term = mpmath.power(q, n)
        for j in range(k):
            total += term
            term = term * (n - j) / (j + 1) * eps / q
        return +total


def binom_lower_tail_beta(n: int, eps, k: int):
    """Same tail through the regularized incomplete beta function."""
    with mpmath.workdps(_workdps(n)):
        return 1 - mpmath.betainc(k, n - k + 1, 0, mpmath.mpf(eps), regularized=True)


def none_below_prob(n: int, eps):
    """``P(min(Z_1..Z_n) >= eps) = (1 - eps)**n``."""
    with mpmath.workdps(_workdps(n)):
        return mpmath.exp(n * mpmath.log1p(-mpmath.mpf(eps)))


@dataclass
class Checkpoint:
    i: int
    k: int
    n: int
    eps: object  # mpf, lower edge of the band is the next checkpoint's eps
    delta: float
    tail_few: object = None  # P(fewer than k values below eps)
    tail_few_check: object = None
    none_below_next: object = None  # P(no value below the next eps)

    @property
    def log_eps(self) -> float:
        return float(mpmath.log(self.eps))


@dataclass
class CounterexampleSchedule:
    """Checkpoints ``i = 2..horizon`` (``i = 1`` would ask for zero neighbors)."""

    horizon: int
    delta: Callable[[int], float] = field(default=lambda i: 2.0**-i, compare=False)
    eps_start: float = 0.5
    checkpoints: list = field(default_factory=list)
    next_eps: object = None

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if not self.checkpoints:
            self._build()

    def _smallest_n(self, lower: int, eps, k: int, budget) -> int:
        """Smallest ``n >= lower`` meeting the tail budget, up to a relative ``2**-SEARCH_BITS``."""
        ok = lambda n: binom_lower_tail(n, eps, k) <= budget
        with mpmath.workdps(30):
            start = int(mpmath.ceil(k / mpmath.mpf(eps)))
        hi = max(lower, start)
        if ok(lower):
            return lower
        while not ok(hi):
            hi *= 2
        lo = max(lower, hi // 2)
        while hi - lo > max(1, hi >> SEARCH_BITS):
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def _build(self) -> None:
        eps = mpmath.mpf(self.eps_start)
        prev_n = 0
        for i in range(2, self.horizon + 1):
            k = checkpoint_k(i)
            d = self.delta(i)
            budget = mpmath.mpf(d) / TAIL_SPLIT
            n = self._smallest_n(prev_n + 1, eps, k, budget)
            with mpmath.workdps(_workdps(n)):
                nxt = -mpmath.expm1(mpmath.log1p(-budget) / n)
            cp = Checkpoint(i=i, k=k, n=n, eps=eps, delta=d)
            cp.tail_few = binom_lower_tail(n, eps, k)
            cp.tail_few_check = binom_lower_tail_beta(n, eps, k)
            cp.none_below_next = none_below_prob(n, nxt)
            self.checkpoints.append(cp)
            eps, prev_n = nxt, n
        self.next_eps = eps
        self.verify()

    def verify(self) -> None:
        """Recheck each certificate with an independent evaluation; raise on failure."""
        for cp in self.checkpoints:
            budget = mpmath.mpf(cp.delta) / TAIL_SPLIT
            with mpmath.workdps(_workdps(cp.n)):
                few_ok = cp.tail_few_check <= budget * (1 + mpmath.mpf(10) ** -20)
                agree = abs(cp.tail_few - cp.tail_few_check) <= mpmath.mpf(10) ** -25 * max(budget, cp.tail_few)
                none_ok = 1 - cp.none_below_next <= budget * (1 + mpmath.mpf(10) ** -20)
                total_ok = cp.tail_few + (1 - cp.none_below_next) < cp.delta
            if not (few_ok and agree and none_ok and total_ok):
                raise RuntimeError(f"certificate failed at checkpoint i={cp.i}")

    def band(self, i: int):
        """``(log eps_{i+1}, log eps_i)`` for checkpoint ``i``."""
        j = i - 2
        hi = self.checkpoints[j].log_eps
        lo = self.checkpoints[j + 1].log_eps if j + 1 < len(self.checkpoints) else float(mpmath.log(self.next_eps))
        return lo, hi

    def k_of_n(self, n: int) -> int:
        """Piecewise-constant ``k = ceil(ln i)`` on ``n_i <= n < n_{i+1}`` (1 before ``n_2``)."""
        k = 1
        for cp in self.checkpoints:
            if cp.n <= n:
                k = max(1, cp.k)
            else:
                break
        return min(k, n) if n > 0 else 1

    def as_schedule(self) -> Schedule:
        return Schedule("prop12", self.k_of_n)


PRESETS = {"sqrt": sqrt_schedule, "log": log_schedule}


def schedule_by_name(name: str, horizon: int = 12) -> Schedule:
    if name == "prop12":
        return CounterexampleSchedule(horizon).as_schedule()
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown schedule {name!r}") from None
