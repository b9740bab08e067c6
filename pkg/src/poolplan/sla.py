"""End-to-end success probability: admitted and never timed out."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import ChannelParams, DomainError, Infeasible, PoolLayout, WorkloadParams
from .engset import blocking_distributed, blocking_recursive
from .timeout import timeout_probability


class Architecture(str, Enum):
    centralized = "centralized"
    distributed = "distributed"


@dataclass(frozen=True)
class SuccessReport:
    architecture: Architecture
    blocking: float
    timeout: float
    success: float
    stable: bool = True


def success_centralized(workload: WorkloadParams, channel: ChannelParams,
                        licenses: int, population: int) -> SuccessReport:
    b = blocking_recursive(licenses, population, workload.rho)
    p = timeout_probability(channel, workload.service_rate)
    return SuccessReport(Architecture.centralized, b, p, (1.0 - b) * (1.0 - p), channel.stable)


def success_distributed(workload: WorkloadParams, layout: PoolLayout) -> SuccessReport:
    # servers sit next to their users, so no congestion timeout
    b = blocking_distributed(layout, workload.rho)
    return SuccessReport(Architecture.distributed, b, 0.0, 1.0 - b)


def max_timeout_for_sla(success_min: float, blocking: float) -> float:
    """Largest timeout probability that still meets ``success_min`` given ``blocking``.

    Raises :class:`Infeasible` when blocking alone already breaks the SLA.
    """
    if not 0 < success_min < 1:
        raise DomainError(f"success_min must lie in (0, 1), got {success_min}")
    if not 0 <= blocking < 1:
        if blocking == 1:
            raise Infeasible("every request is blocked")
        raise DomainError(f"blocking must lie in [0, 1), got {blocking}")
    p_max = 1.0 - success_min / (1.0 - blocking)
    if p_max <= 0:
        raise Infeasible(
            f"blocking {blocking:.6g} leaves at most {1 - blocking:.6g} success, "
            f"below the target {success_min}")
    return p_max
