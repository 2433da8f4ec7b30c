"""Balls, disconnected families, multiplicity and dimension witnesses.

A family of balls is *disconnected* when no ball's center lies in another
ball of the family. A disconnected family whose balls all contain one point
witnesses a large Nagata dimension; ``koranyi_reimann_family`` builds such a
family of arbitrary size in the Heisenberg group.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .metric_core import (
    Heisenberg,
    HeisPoint,
    MetricSpace,
    heis_distance4_exact,
    heis_norm,
    heis_norm4_exact,
)


@dataclass(frozen=True)
class Ball:
    """``B(center, radius)`` (open) or ``B̄(center, radius)`` (closed).

    ``exact_radius4`` optionally pins ``radius**4`` as an exact rational; the
    Heisenberg containment test then compares fourth powers exactly.
    """

    center: object
    radius: float
    closed: bool = True
    exact_radius4: Optional[Fraction] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")


@dataclass(frozen=True)
class BallFamily:
    space: MetricSpace
    balls: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))

    def __len__(self):
        return len(self.balls)

    def __iter__(self):
        return iter(self.balls)

    def extended(self, ball: Ball) -> "BallFamily":
        return BallFamily(self.space, self.balls + (ball,))


@dataclass(frozen=True)
class DimensionWitness:
    family: BallFamily
    witness_point: object
    multiplicity: int
    scale: float = math.inf

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        if any(not b.radius < self.scale for b in self.family):
            raise ValueError("every radius must be below the scale")
        if multiplicity_at(self.family, self.witness_point) != self.multiplicity:
            raise ValueError("witness point multiplicity does not match")


@dataclass(frozen=True)
class DeGrootWitness:
    """Candidates pairwise farther apart than ``r``.

    ``exhaustive`` is False when the set came from the greedy search, in which
    case its size is only a lower bound on the largest such set.
    """

    indices: tuple
    points: tuple
    exhaustive: bool


def _heis_radius4(ball: Ball) -> Fraction:
    if ball.exact_radius4 is not None:
        return ball.exact_radius4
    return Fraction(ball.radius) ** 4


def ball_contains(space: MetricSpace, ball: Ball, p) -> bool:
    if ball.radius == 0:
        return ball.closed and space.distance(ball.center, p) == 0
    if isinstance(space, Heisenberg):
        space.check_point(p)
        d4 = heis_distance4_exact(HeisPoint(*ball.center), HeisPoint(*p))
        r4 = _heis_radius4(ball)
        return d4 <= r4 if ball.closed else d4 < r4
    space.check_point(p)
    sign = int(space.compare_radius(space.as_batch([p]), ball.center, ball.radius)[0])
    return sign <= 0 if ball.closed else sign < 0


def is_disconnected_family(family: BallFamily) -> bool:
    balls = family.balls
    for i, bi in enumerate(balls):
        for j, bj in enumerate(balls):
            if i != j and ball_contains(family.space, bj, bi.center):
                return False
    return True


def multiplicity_at(family: BallFamily, p) -> int:
    return sum(ball_contains(family.space, b, p) for b in family.balls)


def greedy_disconnected_subfamily(family: BallFamily) -> BallFamily:
    """Maximal disconnected subfamily, scanning balls in list order.

    With equal radii a ball that is skipped has its center inside a kept ball,
    so the result covers every original center.
    """
    radii = {b.radius for b in family.balls}
    if len(radii) > 1:
        raise ValueError("greedy_disconnected_subfamily needs equal radii")
    kept: list[Ball] = []
    for b in family.balls:
        if any(ball_contains(family.space, k, b.center) or ball_contains(family.space, b, k.center) for k in kept):
            continue
        kept.append(b)
    return BallFamily(family.space, kept)


EXHAUSTIVE_LIMIT = 20


def de_groot_violation(space: MetricSpace, center, r: float, candidates: Sequence) -> Optional[DeGrootWitness]:
    """Largest set of candidates in ``B̄(center, r)`` that are pairwise ``> r`` apart.

    Returns None when no pair of candidates is farther apart than ``r``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    ball = Ball(center, r, closed=True)
    for c in candidates:
        if not ball_contains(space, ball, c):
            raise ValueError(f"candidate {c!r} lies outside the closed ball")
    n = len(candidates)
    far = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            far[i, j] = far[j, i] = space.distance(candidates[i], candidates[j]) > r
    if not far.any():
        return None
    if n <= EXHAUSTIVE_LIMIT:
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(zip(*np.nonzero(np.triu(far))))
        clique, _ = nx.max_weight_clique(g, weight=None)
        chosen = sorted(int(i) for i in clique)
        exhaustive = True
    else:
        # farthest-point greedy seeded by the most isolated candidate
        chosen = [int(np.argmax(far.sum(axis=1)))]
        alive = far[chosen[0]].copy()
        while alive.any():
            nxt = int(np.flatnonzero(alive)[np.argmax(far[alive][:, alive].sum(axis=1))])
            chosen.append(nxt)
            alive &= far[nxt]
        chosen.sort()
        exhaustive = False
    return DeGrootWitness(tuple(chosen), tuple(candidates[i] for i in chosen), exhaustive)


MAX_SHRINK_STEPS = 200


def koranyi_unit_point(j: int) -> tuple[float, float, complex, float]:
    """``(psi_j, theta_j, z_j, t_j)`` with ``(z_j, t_j)`` on the unit sphere."""
    psi = math.pi - (math.pi / 2) / (j + 1) ** 2
    theta = (math.pi / 2) * (j - 1) / j
    z = cmath.exp(1j * theta) * math.sqrt(math.sin(psi))
    return psi, theta, z, math.cos(psi)


def koranyi_reimann_family(N: int, shrink_factor: float = 0.5) -> tuple[BallFamily, dict]:
    """Disconnected family of ``N`` closed Heisenberg balls all containing the origin.

    Ball ``j`` is centered at ``p_j = (rho_j z_j, rho_j**2 t_j)``; ``rho_j``
    starts at ``rho_{j-1} * shrink_factor`` and keeps shrinking until ``p_j``
    leaves every earlier ball. The radius is ``|p_j|_H`` so each ball reaches
    the origin. Containment is decided in exact rational arithmetic.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < shrink_factor < 1:
        raise ValueError("shrink_factor must lie in (0, 1)")
    space = Heisenberg()
    balls: list[Ball] = []
    rows = []
    rho = 1.0
    for j in range(1, N + 1):
        psi, theta, z, t = koranyi_unit_point(j)
        if j > 1:
            rho *= shrink_factor
        steps = 0
        while True:
            p = HeisPoint(rho * z.real, rho * z.imag, rho * rho * t)
            if all(heis_distance4_exact(b.center, p) > b.exact_radius4 for b in balls):
                break
            rho *= shrink_factor
            steps += 1
            if steps >= MAX_SHRINK_STEPS:
                raise RuntimeError(f"shrink loop did not terminate for j={j}")
        balls.append(Ball(p, heis_norm(p), closed=True, exact_radius4=heis_norm4_exact(p)))
        rows.append(
            {
                "j": j,
                "psi": psi,
                "theta": theta,
                "z_re": z.real,
                "z_im": z.imag,
                "t": t,
                "scale": rho,
                "shrink_steps": steps,
                "p": list(p),
                "r": balls[-1].radius,
            }
        )
    family = BallFamily(space, balls)
    contains = [[ball_contains(space, bj, bi.center) for bj in balls] for bi in balls]
    turning = []
    for j in range(1, N):
        psi, _, zj, _ = koranyi_unit_point(j)
        _, _, zn, _ = koranyi_unit_point(j + 1)
        turning.append((cmath.exp(1j * psi) * zn * zj.conjugate()).imag)
    report = {
        "N": N,
        "shrink_factor": shrink_factor,
        "balls": rows,
        "center_in_ball": contains,
        "turning_imag": turning,
        "disconnected": not any(contains[i][j] for i in range(N) for j in range(N) if i != j),
        "multiplicity_at_origin": multiplicity_at(family, HeisPoint(0.0, 0.0, 0.0)),
    }
    return family, report
