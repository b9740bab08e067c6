"""Soft-state timeout caused by link congestion.

A client renews its session state with a probe every ``1/r`` seconds. A probe
succeeds when its M/M/1 sojourn time over the link is below ``tau``; the first
failed probe tears the session down. A timeout happens when that failure comes
before the user's target session end.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .core import ChannelParams, DomainError, UnstableChannelWarning


@dataclass(frozen=True)
class ProbeModel:
    """Renewal process for one session.

    The number of successful probes before the first failure is geometric,
    P(N = n) = q**n * (1 - q); probes are spaced exactly ``1/probe_rate``
    apart, so the time to timeout is ``(N + 1) / probe_rate``.
    """

    q: float
    probe_rate: float
    mu: float
    stable: bool = True

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise DomainError(f"q must be a probability, got {self.q}")
        if self.probe_rate <= 0 or self.mu <= 0:
            raise DomainError("probe_rate and mu must be positive")

    @classmethod
    def from_channel(cls, channel: ChannelParams, mu: float) -> "ProbeModel":
        return cls(probe_success(channel), channel.probe_rate, mu, channel.stable)

    def timeout_probability(self) -> float:
        return timeout_laplace(self, self.mu)


def _warn_unstable(channel: ChannelParams) -> None:
    warnings.warn(
        f"background load {channel.background_rate} pkt/s saturates a link serving "
        f"{channel.service_rate} pkt/s; every probe is treated as failed",
        UnstableChannelWarning, stacklevel=3)


def _probe_failure(channel: ChannelParams) -> float:
    """P(sojourn > tau); 1 on an unstable link."""
    if not channel.stable:
        _warn_unstable(channel)
        return 1.0
    return math.exp(-channel.headroom * channel.timeout_threshold)


def probe_success(channel: ChannelParams) -> float:
    """Probability that one probe's M/M/1 sojourn is shorter than ``tau``.

    Returns 0 (with an :class:`UnstableChannelWarning`) when background load
    meets or exceeds the link service rate.
    """
    if not channel.stable:
        _warn_unstable(channel)
        return 0.0
    return -math.expm1(-channel.headroom * channel.timeout_threshold)


def timeout_laplace(model: ProbeModel, s: float) -> float:
    """Laplace transform of the time to timeout, evaluated at ``s``."""
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    if model.q == 1.0:
        if s == 0:
            raise DomainError("with q = 1 the session never times out; transform undefined at s = 0")
        return 0.0
    z = math.exp(-s / model.probe_rate)
    return z * (1.0 - model.q) / (1.0 - z * model.q)


def _timeout_from_failure(fail: float, mu: float, probe_rate: float) -> float:
    # e^{-mu/r} f / (1 - e^{-mu/r} (1 - f)), with 1 - e^{-mu/r} kept accurate
    a = math.exp(-mu / probe_rate)
    if fail == 1.0:
        return a
    return a * fail / (-math.expm1(-mu / probe_rate) + a * fail)


def timeout_probability(channel: ChannelParams, mu: float) -> float:
    """Probability that congestion ends a session before its target duration.

    ``mu`` is the session completion rate (1 / mean target duration).
    """
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    return _timeout_from_failure(_probe_failure(channel), mu, channel.probe_rate)


def max_timeout(mu: float, probe_rate: float) -> float:
    """Largest possible timeout probability: every probe fails."""
    return math.exp(-mu / probe_rate)


def capacity_for_timeout(p_target: float, mu: float, probe_rate: float, tau: float,
                         background_rate: float, packet_service_factor: float) -> float:
    """Total link capacity (bits/s) at which the timeout probability equals ``p_target``.

    Attainable targets lie strictly between 0 and ``exp(-mu/r)``.
    """
    ceiling = max_timeout(mu, probe_rate)
    if not 0 < p_target < ceiling:
        raise DomainError(
            f"p_target must lie in (0, {ceiling!r}) for these parameters, got {p_target!r}")
    if mu <= 0 or probe_rate <= 0 or tau <= 0 or packet_service_factor <= 0:
        raise DomainError("mu, probe_rate, tau and packet_service_factor must be positive")
    ratio = (1.0 - p_target) / (p_target * math.expm1(mu / probe_rate))
    headroom = math.log(ratio) / tau
    return (background_rate + headroom) / packet_service_factor


def capacity_for_channel(p_target: float, channel: ChannelParams, mu: float) -> float:
    """:func:`capacity_for_timeout` with the link parameters taken from ``channel``."""
    return capacity_for_timeout(p_target, mu, channel.probe_rate, channel.timeout_threshold,
                                channel.background_rate, channel.packet_service_factor)


def utilization(channel: ChannelParams) -> float:
    """Background load over link service rate."""
    return channel.background_rate / channel.service_rate
