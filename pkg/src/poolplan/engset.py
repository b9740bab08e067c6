"""Engset blocking for finite-source loss systems.

``b(L, S)`` is the call congestion seen by arriving requests when ``S`` users
share ``L`` licenses, each idle user requests at rate lambda and each session
lasts Exponential(mu); ``rho = lambda / mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Sequence

from .core import DomainError, PoolLayout

DIRECT_MAX_POPULATION = 60


class Method(str, Enum):
    direct = "direct"
    recursive = "recursive"


@dataclass(frozen=True)
class BlockingResult:
    probability: float
    method: Method


def _check(licenses: int, population: int, rho: float) -> None:
    if population < 1:
        raise DomainError(f"population must be >= 1, got {population}")
    if licenses < 0:
        raise DomainError(f"licenses must be >= 0, got {licenses}")
    if not rho > 0 or not math.isfinite(rho):
        raise DomainError(f"rho must be positive and finite, got {rho}")


def blocking_direct(licenses: int, population: int, rho: float) -> float:
    """Engset blocking from the binomial sum. Small instances only.

    Raises OverflowError above ``DIRECT_MAX_POPULATION`` users.
    """
    _check(licenses, population, rho)
    if population > DIRECT_MAX_POPULATION:
        raise OverflowError(
            f"population {population} exceeds {DIRECT_MAX_POPULATION}; "
            "use blocking_recursive")
    if licenses >= population:
        return 0.0
    terms = [math.comb(population - 1, i) * rho**i for i in range(licenses + 1)]
    return terms[-1] / math.fsum(terms)


def blocking_curve(max_licenses: int, population: int, rho: float) -> list[float]:
    """``[b(0,S), b(1,S), ..., b(max_licenses,S)]`` from one pass of the recursion."""
    _check(max_licenses, population, rho)
    out = [1.0]
    b = 1.0
    for j in range(1, max_licenses + 1):
        if j >= population:
            b = 0.0
        else:
            # an arriving user sees the other S - 1 sources
            t = rho * (population - j) * b
            b = t / (j + t)
        out.append(b)
    return out


def blocking_recursive(licenses: int, population: int, rho: float) -> float:
    """Engset blocking via the forward recursion; exact 0 once L >= S."""
    _check(licenses, population, rho)
    if licenses >= population:
        return 0.0
    return blocking_curve(licenses, population, rho)[-1]


def time_congestion(licenses: int, population: int, rho: float) -> float:
    """Fraction of time all ``licenses`` are busy with ``population`` sources.

    Uses the recursion with factor ``rho * (S - j + 1)``. This equals call
    congestion for a population of ``S + 1``, i.e. it is pessimistic by one
    user compared with :func:`blocking_recursive`.
    """
    _check(licenses, population, rho)
    if licenses > population:
        return 0.0
    return blocking_curve(licenses, population + 1, rho)[-1]


def blocking(licenses: int, population: int, rho: float,
             method: Method | str = Method.recursive) -> BlockingResult:
    method = Method(method)
    fn = blocking_direct if method is Method.direct else blocking_recursive
    return BlockingResult(fn(licenses, population, rho), method)


def blocking_distributed(layout: PoolLayout, rho: float) -> float:
    """Population-weighted blocking over isolated pools (no overflow between sites)."""
    total = layout.population
    return math.fsum(s.population / total * blocking_recursive(s.licenses, s.population, rho)
                     for s in layout.sites)


def min_licenses_for_blocking(population: int, rho: float, blocking_max: float) -> int:
    """Smallest L with b(L, S) <= ``blocking_max``; never more than S."""
    if not 0 < blocking_max < 1:
        raise DomainError(f"blocking_max must lie in (0, 1), got {blocking_max}")
    curve = blocking_curve(population, population, rho)
    return next(L for L, b in enumerate(curve) if b <= blocking_max)


# ---------------------------------------------------------------------------
# License allocation across pools
# ---------------------------------------------------------------------------


def _weighted_curves(populations: Sequence[int], rho: float) -> list[list[float]]:
    total = sum(populations)
    return [[s / total * b for b in blocking_curve(s, s, rho)] for s in populations]


def allocate_greedy(populations: Sequence[int], rho: float,
                    blocking_max: float) -> tuple[int, ...]:
    """Grant licenses one at a time to the pool whose next license lowers the
    weighted blocking most (ties to the lowest index) until it is within bound.

    Fast, but not always minimal: Engset blocking is not convex in L at small L.
    """
    if not 0 < blocking_max < 1:
        raise DomainError(f"blocking_max must lie in (0, 1), got {blocking_max}")
    curves = _weighted_curves(populations, rho)
    alloc = [0] * len(populations)
    current = math.fsum(c[0] for c in curves)
    while current > blocking_max:
        best, best_gain = -1, -math.inf
        for i, c in enumerate(curves):
            if alloc[i] < populations[i]:
                gain = c[alloc[i]] - c[alloc[i] + 1]
                if gain > best_gain:
                    best, best_gain = i, gain
        alloc[best] += 1
        current = math.fsum(c[a] for c, a in zip(curves, alloc))
    return tuple(alloc)


def allocate_exact(populations: Sequence[int], rho: float,
                   blocking_max: float) -> tuple[int, ...]:
    """Minimum-total allocation with weighted blocking <= ``blocking_max``.

    Dynamic program over pools: for every license budget it keeps the smallest
    achievable weighted blocking. Among minimum-total allocations the one with
    the lowest blocking wins; remaining ties go to the lexicographically
    largest allocation (earlier pools first), matching :func:`allocate_greedy`.
    """
    if not 0 < blocking_max < 1:
        raise DomainError(f"blocking_max must lie in (0, 1), got {blocking_max}")
    curves = _weighted_curves(populations, rho)
    # best[k] = (blocking, allocation) using exactly k licenses over pools seen so far
    best: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    for s, curve in zip(populations, curves):
        nxt: list[tuple[float, tuple[int, ...]] | None] = [None] * (len(best) + s)
        for k, (b_prev, alloc) in enumerate(best):
            for li in range(s + 1):
                cand = (b_prev + curve[li], alloc + (li,))
                cur = nxt[k + li]
                if cur is None or _better(cand, cur):
                    nxt[k + li] = cand
        best = nxt  # type: ignore[assignment]
    for b, alloc in best:
        if math.fsum(c[a] for c, a in zip(curves, alloc)) <= blocking_max:
            return alloc
    raise AssertionError("full allocation always has zero blocking")


def _better(a: tuple[float, tuple[int, ...]], b: tuple[float, tuple[int, ...]]) -> bool:
    if a[0] != b[0]:
        return a[0] < b[0]
    return a[1] > b[1]


def allocate_exhaustive(populations: Sequence[int], rho: float,
                        blocking_max: float) -> tuple[int, ...]:
    """Brute-force reference for :func:`allocate_exact`; small layouts only."""
    curves = _weighted_curves(populations, rho)
    feasible = (
        alloc for alloc in product(*(range(s + 1) for s in populations))
        if math.fsum(c[a] for c, a in zip(curves, alloc)) <= blocking_max
    )
    return min(feasible, key=lambda a: (sum(a), math.fsum(c[x] for c, x in zip(curves, a)),
                                        tuple(-x for x in a)))
