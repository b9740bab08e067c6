"""Minimum-cost license and bandwidth planning for both architectures.

Centralized: all users share one license pool behind a link that may be
upgraded by ``C'``. For each license count the cheapest sufficient capacity
has a closed form, so the optimum is found by scanning ``L = 0..S``.

Distributed: each site runs its own pool locally (no link upgrade, no
timeout); the optimum is the smallest total license count that keeps the
population-weighted blocking within the SLA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .core import ChannelParams, CostModel, Infeasible, MBPS, PoolLayout, SlaTarget, WorkloadParams
from .engset import allocate_exact, allocate_greedy, blocking_curve
from .sla import (Architecture, max_timeout_for_sla, success_centralized,
                  success_distributed)
from .timeout import capacity_for_channel, max_timeout, timeout_probability


@dataclass(frozen=True)
class PlanResult:
    architecture: Architecture
    licenses_total: int
    licenses_per_pool: tuple[int, ...]
    capacity_extra: float  # bits per second
    cost: float
    achieved_success: float
    blocking: float
    timeout: float
    feasible: bool = True
    alternative: "PlanResult | None" = None

    @property
    def capacity_extra_mbps(self) -> float:
        return self.capacity_extra / MBPS


def required_extra_capacity(workload: WorkloadParams, channel: ChannelParams,
                            blocking: float, success_min: float) -> float:
    """Smallest ``C'`` (bits/s) meeting ``success_min`` given centralized ``blocking``.

    Raises :class:`Infeasible` if the blocking alone breaks the SLA.
    """
    p_max = max_timeout_for_sla(success_min, blocking)
    mu = workload.service_rate
    if p_max >= max_timeout(mu, channel.probe_rate):
        return 0.0
    extra = max(0.0, capacity_for_channel(p_max, channel, mu) - channel.capacity_base)
    return _nudge_up(workload, channel, blocking, success_min, extra)


def _nudge_up(workload, channel, blocking, success_min, extra):
    # the closed-form capacity can land a few ulps short of the target
    step = math.ulp(channel.capacity_base + extra)
    for _ in range(256):
        ch = replace(channel, capacity_extra=extra)
        if (1.0 - blocking) * (1.0 - timeout_probability(ch, workload.service_rate)) >= success_min:
            return extra
        extra += step
        step *= 2.0
    raise Infeasible("could not reach the success target by adding capacity")


def optimize_centralized(workload: WorkloadParams, channel: ChannelParams, population: int,
                         cost: CostModel, sla: SlaTarget) -> PlanResult:
    """Cheapest (L, C') for one central pool; ties go to fewer licenses.

    ``channel.capacity_extra`` is ignored: the search starts from the base link.
    """
    base = replace(channel, capacity_extra=0.0)
    curve = blocking_curve(population, population, workload.rho)
    best: tuple[float, int, float] | None = None
    for L, b in enumerate(curve):
        try:
            extra = required_extra_capacity(workload, base, b, sla.success_min)
        except Infeasible:
            continue
        c = cost.cost(L, extra)
        if best is None or (c, L, extra) < best:
            best = (c, L, extra)
    if best is None:
        raise Infeasible(f"no centralized configuration reaches success {sla.success_min}")
    c, L, extra = best
    report = success_centralized(workload, replace(base, capacity_extra=extra), L, population)
    return PlanResult(Architecture.centralized, L, (L,), extra, c, report.success,
                      report.blocking, report.timeout)


def optimize_distributed(workload: WorkloadParams, populations: Sequence[int], cost: CostModel,
                         sla: SlaTarget, method: str = "exact") -> PlanResult:
    """Fewest total licenses over isolated pools meeting the SLA; no link upgrade.

    ``method`` is ``"exact"`` (dynamic program) or ``"greedy"`` (marginal gains).
    """
    allocate = {"exact": allocate_exact, "greedy": allocate_greedy}[method]
    alloc = allocate(list(populations), workload.rho, 1.0 - sla.success_min)
    report = success_distributed(workload, PoolLayout.from_lists(populations, alloc))
    total = sum(alloc)
    return PlanResult(Architecture.distributed, total, tuple(alloc), 0.0, cost.cost(total, 0.0),
                      report.success, report.blocking, 0.0)


def plan(workload: WorkloadParams, channel: ChannelParams, populations: Sequence[int],
         cost: CostModel, sla: SlaTarget) -> PlanResult:
    """Pick the cheaper architecture; the other one is kept in ``alternative``.

    The centralized arm pools every user behind the shared link. Equal costs
    favour the distributed arm, which needs no link upgrade.
    """
    arms = []
    for solve in (lambda: optimize_centralized(workload, channel, sum(populations), cost, sla),
                  lambda: optimize_distributed(workload, populations, cost, sla)):
        try:
            arms.append(solve())
        except Infeasible:
            pass
    if not arms:
        raise Infeasible("neither architecture reaches the success target")
    if len(arms) == 1:
        return arms[0]
    cent, dist = arms
    if dist.cost <= cent.cost:
        return replace(dist, alternative=cent)
    return replace(cent, alternative=dist)
