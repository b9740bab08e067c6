"""Capacity planning for centralized vs. distributed session-state pools."""

__version__ = "0.1.0"

from .core import (ChannelParams, CostModel, DomainError, Infeasible, PoolLayout, Scenario,
                   SlaTarget, UnitError, UnstableChannelWarning, WorkloadParams, denormalize,
                   normalize)
from .engset import blocking_direct, blocking_distributed, blocking_recursive
from .planner import PlanResult, optimize_centralized, optimize_distributed, plan
from .sla import success_centralized, success_distributed
from .timeout import capacity_for_timeout, probe_success, timeout_probability

__all__ = [
    "ChannelParams", "CostModel", "DomainError", "Infeasible", "PlanResult", "PoolLayout",
    "Scenario", "SlaTarget", "UnitError", "UnstableChannelWarning", "WorkloadParams",
    "blocking_direct", "blocking_distributed", "blocking_recursive", "capacity_for_timeout",
    "denormalize", "normalize", "optimize_centralized", "optimize_distributed", "plan",
    "probe_success", "success_centralized", "success_distributed", "timeout_probability",
]
