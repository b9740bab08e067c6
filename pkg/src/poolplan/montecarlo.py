"""Monte Carlo estimators used to cross-check the closed forms.

Every estimator runs ``cfg.replications`` independent replications and
reports the mean of the replication estimates with a 99% normal-approximation
confidence half-width. Replication ``i`` draws from
``PCG64(SeedSequence(seed, spawn_key=(i,)))``, so results depend only on the
seed and the replication index, never on execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .core import ChannelParams, DomainError, WorkloadParams

RNG_ALGORITHM = "numpy.random.PCG64 seeded by SeedSequence(seed, spawn_key=(replication,))"
Z99 = NormalDist().inv_cdf(0.995)
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    replications: int = 20
    horizon: int = 100_000
    warmup_fraction: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError(f"replications must be >= 1, got {self.replications}")
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if not 0 <= self.warmup_fraction < 1:
            raise DomainError(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    ci99_halfwidth: float
    samples: int
    replication_means: tuple[float, ...] = field(repr=False, default=())
    rng: str = RNG_ALGORITHM

    @property
    def low(self) -> float:
        return self.mean - self.ci99_halfwidth

    @property
    def high(self) -> float:
        return self.mean + self.ci99_halfwidth

    def covers(self, value: float) -> bool:
        return self.low <= value <= self.high


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def pool(values: Sequence[float], samples: int) -> SimEstimate:
    """Combine per-replication estimates, in replication order."""
    arr = np.asarray(values, dtype=float)
    mean = float(math.fsum(arr) / len(arr))
    if len(arr) < 2:
        half = math.inf
    else:
        half = Z99 * float(np.std(arr, ddof=1)) / math.sqrt(len(arr))
    return SimEstimate(mean, half, samples, tuple(float(v) for v in arr))


def _replicate(cfg: SimConfig, one: Callable[[np.random.Generator], tuple[float, int]]) -> SimEstimate:
    def run(i: int) -> tuple[float, int]:
        return one(replication_rng(cfg.seed, i))

    idx = range(cfg.replications)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(run, idx))
    else:
        results = [run(i) for i in idx]
    return pool([r[0] for r in results], sum(r[1] for r in results))


# ---------------------------------------------------------------------------
# Finite-source loss system
# ---------------------------------------------------------------------------


def _engset_replication(population: int, licenses: int, rho: float, arrivals: int,
                        warmup: int, rng: np.random.Generator) -> tuple[float, int]:
    # Embedded jump chain of the birth-death process: from n active sessions the
    # next event is an arrival with probability (S-n)lambda / ((S-n)lambda + n mu).
    p_arrival = [(population - n) * rho / ((population - n) * rho + n)
                 for n in range(population + 1)]
    n = 0
    seen = blocked = 0
    total = warmup + arrivals
    while seen < total:
        for u in rng.random(_CHUNK).tolist():
            if u < p_arrival[n]:
                seen += 1
                if n == licenses:
                    if seen > warmup:
                        blocked += 1
                else:
                    n += 1
                if seen == total:
                    break
            else:
                n -= 1
    return blocked / arrivals, arrivals


def simulate_engset(population: int, licenses: int, workload: WorkloadParams,
                    cfg: SimConfig) -> SimEstimate:
    """Fraction of arriving requests that find every license busy.

    ``cfg.horizon`` counts arrivals per replication after the warm-up, which
    is ``warmup_fraction * horizon`` further arrivals.
    """
    if population < 1 or licenses < 0:
        raise DomainError("population must be >= 1 and licenses >= 0")
    licenses = min(licenses, population)
    warmup = int(cfg.warmup_fraction * cfg.horizon)
    return _replicate(cfg, lambda rng: _engset_replication(
        population, licenses, workload.rho, cfg.horizon, warmup, rng))


# ---------------------------------------------------------------------------
# Probe renewal / timeout
# ---------------------------------------------------------------------------


def _probe_fail_probability(channel: ChannelParams, allow_unstable: bool) -> float:
    if channel.stable:
        return math.exp(-channel.headroom * channel.timeout_threshold)
    if not allow_unstable:
        raise DomainError("link is saturated (M*C <= background rate); "
                          "pass allow_unstable=True to treat every probe as failed")
    return 1.0


def _timeout_geometric(channel, mu, sessions, fail, rng):
    targets = rng.exponential(1.0 / mu, sessions)
    if fail == 0.0:
        return 0
    first_fail = rng.geometric(fail, sessions)  # index of the first failed probe, >= 1
    return int(np.count_nonzero(first_fail / channel.probe_rate < targets))


def _timeout_explicit(channel, mu, sessions, allow_unstable, rng):
    # Draw an M/M/1 sojourn for every probe each session actually sends.
    targets = rng.exponential(1.0 / mu, sessions)
    alive = np.arange(sessions)
    timed_out = 0
    k = 1
    while alive.size:
        alive = alive[k / channel.probe_rate < targets[alive]]
        if not alive.size:
            break
        if channel.stable:
            delays = rng.exponential(1.0 / channel.headroom, alive.size)
            failed = delays > channel.timeout_threshold
        else:
            failed = np.ones(alive.size, dtype=bool)
        timed_out += int(np.count_nonzero(failed))
        alive = alive[~failed]
        k += 1
    return timed_out


def simulate_timeout(channel: ChannelParams, mu: float, cfg: SimConfig,
                     allow_unstable: bool = False, method: str = "geometric") -> SimEstimate:
    """Fraction of sessions ended by a failed probe before their target duration.

    Each session draws a target duration ~ Exponential(mu) and sends probes at
    ``k / r``; a probe fails when its sojourn ~ Exponential(M*C - Lambda)
    exceeds ``tau``. ``method="explicit"`` samples every probe delay;
    ``"geometric"`` samples the index of the first failing probe directly,
    which has the same law and is much faster. ``cfg.horizon`` is the number
    of sessions per replication.
    """
    fail = _probe_fail_probability(channel, allow_unstable)
    if method == "geometric":
        one = lambda rng: (_timeout_geometric(channel, mu, cfg.horizon, fail, rng) / cfg.horizon,
                           cfg.horizon)
    elif method == "explicit":
        one = lambda rng: (_timeout_explicit(channel, mu, cfg.horizon, allow_unstable, rng)
                           / cfg.horizon, cfg.horizon)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _replicate(cfg, one)


def simulate_success_centralized(workload: WorkloadParams, channel: ChannelParams,
                                 licenses: int, population: int, cfg: SimConfig,
                                 sessions: int | None = None,
                                 allow_unstable: bool = False) -> SimEstimate:
    """Admitted fraction times the fraction of admitted sessions that never time out.

    Both parts are simulated independently inside each replication; the
    timeout part uses ``sessions`` sessions (default ``cfg.horizon``).
    """
    sessions = cfg.horizon if sessions is None else sessions
    warmup = int(cfg.warmup_fraction * cfg.horizon)
    fail = _probe_fail_probability(channel, allow_unstable)
    lic = min(licenses, population)

    def one(rng):
        blocked, _ = _engset_replication(population, lic, workload.rho, cfg.horizon, warmup, rng)
        timed = _timeout_geometric(channel, workload.service_rate, sessions, fail, rng)
        return (1.0 - blocked) * (1.0 - timed / sessions), cfg.horizon + sessions

    return _replicate(cfg, one)
