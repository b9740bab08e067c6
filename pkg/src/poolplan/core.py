"""Domain types, unit handling and config normalization.

Internal units: seconds, bits, bits per second, packets per second.
Human-facing values are strings such as ``"8 h"``, ``"10 Mbps"`` or
``"1250 B"``; :func:`normalize` turns a mapping of those into the typed
parameter objects used everywhere else.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Sequence

MBPS = 1e6  # bits per second in one Mbps; cost coefficients are per Mbps


class UnitError(ValueError):
    """Unknown, missing or dimensionally wrong unit tag."""


class DomainError(ValueError):
    """A value violates a model invariant."""


class Infeasible(Exception):
    """No configuration satisfies the requested service level."""


class UnstableChannelWarning(RuntimeWarning):
    """Background load meets or exceeds the link service rate."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WorkloadParams:
    """Per-user session arrival rate and completion rate, both in 1/s.

    The target session duration is Exponential(``service_rate``).
    """

    arrival_rate: float
    service_rate: float

    def __post_init__(self):
        _require(self.arrival_rate > 0 and math.isfinite(self.arrival_rate),
                 f"arrival_rate must be positive and finite, got {self.arrival_rate}")
        _require(self.service_rate > 0 and math.isfinite(self.service_rate),
                 f"service_rate must be positive and finite, got {self.service_rate}")
        _require(math.isfinite(self.rho) and self.rho > 0, "rho must be finite and positive")

    @property
    def rho(self) -> float:
        return self.arrival_rate / self.service_rate

    @property
    def mean_session_duration(self) -> float:
        return 1.0 / self.service_rate

    @classmethod
    def from_rho(cls, rho: float, service_rate: float) -> "WorkloadParams":
        return cls(arrival_rate=rho * service_rate, service_rate=service_rate)


@dataclass(frozen=True)
class ChannelParams:
    """Link between users and a central signaling server.

    ``packet_service_factor`` is packets per bit (1 / mean packet size), so
    ``packet_service_factor * capacity`` is the link service rate in pkt/s.
    """

    capacity_base: float
    packet_service_factor: float
    background_rate: float
    probe_rate: float
    timeout_threshold: float
    capacity_extra: float = 0.0

    def __post_init__(self):
        _require(self.capacity_base > 0, f"capacity_base must be > 0, got {self.capacity_base}")
        _require(self.capacity_extra >= 0, f"capacity_extra must be >= 0, got {self.capacity_extra}")
        _require(self.packet_service_factor > 0,
                 f"packet_service_factor must be > 0, got {self.packet_service_factor}")
        _require(self.background_rate >= 0,
                 f"background_rate must be >= 0, got {self.background_rate}")
        _require(self.probe_rate > 0, f"probe_rate must be > 0, got {self.probe_rate}")
        _require(self.timeout_threshold > 0,
                 f"timeout_threshold must be > 0, got {self.timeout_threshold}")
        _require(self.timeout_threshold < 1.0 / self.probe_rate,
                 f"timeout_threshold ({self.timeout_threshold} s) must be shorter than the "
                 f"probe interval ({1.0 / self.probe_rate} s)")

    @property
    def capacity(self) -> float:
        """Total link capacity in bits per second."""
        return self.capacity_base + self.capacity_extra

    @property
    def service_rate(self) -> float:
        """Link service rate in packets per second."""
        return self.packet_service_factor * self.capacity

    @property
    def headroom(self) -> float:
        """Service rate minus background load (pkt/s); the M/M/1 sojourn rate."""
        return self.service_rate - self.background_rate

    @property
    def stable(self) -> bool:
        return self.headroom > 0

    def at_capacity(self, capacity: float) -> "ChannelParams":
        """Same link, with total capacity set to ``capacity`` bits per second.

        Capacities below the base are expressed by lowering the base.
        """
        if capacity >= self.capacity_base:
            return replace(self, capacity_extra=capacity - self.capacity_base)
        return replace(self, capacity_base=capacity, capacity_extra=0.0)


@dataclass(frozen=True)
class Site:
    population: int
    licenses: int = 0

    def __post_init__(self):
        _require(_is_int(self.population) and self.population >= 1,
                 f"site population must be an integer >= 1, got {self.population!r}")
        _require(_is_int(self.licenses) and self.licenses >= 0,
                 f"site licenses must be an integer >= 0, got {self.licenses!r}")


@dataclass(frozen=True)
class PoolLayout:
    sites: tuple[Site, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        _require(len(self.sites) >= 1, "a layout needs at least one site")

    @classmethod
    def from_lists(cls, populations: Sequence[int],
                   licenses: Sequence[int] | None = None) -> "PoolLayout":
        if licenses is None:
            licenses = [0] * len(populations)
        if len(licenses) != len(populations):
            raise DomainError(
                f"{len(populations)} populations but {len(licenses)} license counts")
        return cls(tuple(Site(int(s), int(l)) for s, l in zip(populations, licenses)))

    @classmethod
    def equal_split(cls, population: int, sites: int, licenses: int = 0) -> "PoolLayout":
        """Split users and licenses as evenly as possible, remainders to the first sites."""
        return cls.from_lists(_spread(population, sites), _spread(licenses, sites))

    @property
    def populations(self) -> tuple[int, ...]:
        return tuple(s.population for s in self.sites)

    @property
    def licenses(self) -> tuple[int, ...]:
        return tuple(s.licenses for s in self.sites)

    @property
    def population(self) -> int:
        return sum(self.populations)

    @property
    def total_licenses(self) -> int:
        return sum(self.licenses)


@dataclass(frozen=True)
class CostModel:
    """``alpha`` per license, ``beta`` per Mbps of added capacity on each of
    ``links_upgraded`` links."""

    alpha: float
    beta: float
    links_upgraded: int = 1

    def __post_init__(self):
        _require(self.alpha >= 0, f"alpha must be >= 0, got {self.alpha}")
        _require(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        _require(_is_int(self.links_upgraded) and self.links_upgraded >= 1,
                 f"links_upgraded must be an integer >= 1, got {self.links_upgraded!r}")

    def cost(self, licenses: int, capacity_extra: float) -> float:
        """Cost of ``licenses`` plus ``capacity_extra`` bits per second of upgrade."""
        return self.alpha * licenses + self.beta * self.links_upgraded * capacity_extra / MBPS

    def scaled(self, k: float) -> "CostModel":
        return CostModel(self.alpha * k, self.beta * k, self.links_upgraded)


@dataclass(frozen=True)
class SlaTarget:
    success_min: float

    def __post_init__(self):
        _require(0 < self.success_min < 1,
                 f"success_min must lie strictly between 0 and 1, got {self.success_min}")


@dataclass(frozen=True)
class Scenario:
    """Fully normalized inputs for one planning run."""

    workload: WorkloadParams
    channel: ChannelParams
    layout: PoolLayout
    cost: CostModel
    sla: SlaTarget

    def __iter__(self):
        return iter((self.workload, self.channel, self.layout, self.cost, self.sla))


def _require(ok: bool, message: str) -> None:
    if not ok:
        raise DomainError(message)


def _is_int(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _spread(total: int, parts: int) -> list[int]:
    if parts < 1:
        raise DomainError(f"number of sites must be >= 1, got {parts}")
    base, extra = divmod(int(total), parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

_TIME = {
    "s": 1.0, "sec": 1.0, "second": 1.0, "seconds": 1.0,
    "ms": 1e-3, "us": 1e-6,
    "min": 60.0, "minute": 60.0, "minutes": 60.0,
    "h": 3600.0, "hr": 3600.0, "hour": 3600.0, "hours": 3600.0,
    "d": 86400.0, "day": 86400.0, "days": 86400.0,
}
_SIZE = {
    "bit": 1.0, "bits": 1.0, "kbit": 1e3, "Mbit": 1e6, "Gbit": 1e9,
    "B": 8.0, "byte": 8.0, "bytes": 8.0, "kB": 8e3, "KB": 8e3, "MB": 8e6,
}
_BANDWIDTH = {"bps": 1.0, "kbps": 1e3, "Kbps": 1e3, "Mbps": 1e6, "Gbps": 1e9}
# things that can be counted per unit time
_COUNT = {"", "1", "pkt", "pkts", "packet", "packets", "session", "sessions",
          "req", "request", "requests", "probe", "probes"}

DIMENSIONS = ("time", "rate", "bandwidth", "size")
CANONICAL_UNIT = {"time": "s", "rate": "1/s", "bandwidth": "bps", "size": "bit"}

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+(?:\s*/\s*[0-9.eE+-]+)?)\s*(.*?)\s*$")


def _parse_number(text: str) -> float:
    try:
        if "/" in text:
            num, den = text.split("/")
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UnitError(f"cannot parse number {text!r}") from exc


def unit_dimension(unit: str) -> tuple[str, float]:
    """Return (dimension, factor to internal units) for a unit string."""
    u = unit.replace(" ", "")
    if u in _TIME:
        return "time", _TIME[u]
    if u in _SIZE:
        return "size", _SIZE[u]
    if u in _BANDWIDTH:
        return "bandwidth", _BANDWIDTH[u]
    if u in ("Hz", "pps"):
        return "rate", 1.0
    if u.startswith("per"):
        u = "1/" + u[3:]
    if u.count("/") == 1:
        num, den = u.split("/")
        if den in _TIME:
            if num in _SIZE:
                return "bandwidth", _SIZE[num] / _TIME[den]
            if num in _COUNT:
                return "rate", 1.0 / _TIME[den]
    raise UnitError(f"unknown unit {unit!r}")


def parse_quantity(value: Any, dimension: str, key: str = "value") -> float:
    """Parse ``"<number> <unit>"`` and return the value in internal units.

    ``dimension`` is one of :data:`DIMENSIONS`. Bare numbers are rejected:
    every dimensional input must carry its unit.
    """
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    if not isinstance(value, str):
        raise UnitError(f"{key}: missing unit tag, expected a {dimension} such as "
                        f"'1 {CANONICAL_UNIT[dimension]}', got {value!r}")
    m = _QUANTITY.match(value)
    if not m or not m.group(2):
        raise UnitError(f"{key}: missing unit tag, expected a {dimension} such as "
                        f"'1 {CANONICAL_UNIT[dimension]}', got {value!r}")
    number = _parse_number(m.group(1))
    try:
        dim, factor = unit_dimension(m.group(2))
    except UnitError as exc:
        raise UnitError(f"{key}: {exc}") from None
    if dim != dimension:
        raise UnitError(f"{key}: expected a {dimension}, got {value!r} which is a {dim}")
    return number * factor


def format_quantity(value: float, dimension: str) -> str:
    return f"{value!r} {CANONICAL_UNIT[dimension]}"


def _number(raw: Mapping[str, Any], key: str) -> float:
    value = raw[key]
    if isinstance(value, str):
        return _parse_number(value.strip())
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{key}: expected a number, got {value!r}")
    return float(value)


def _count(raw: Mapping[str, Any], key: str) -> int:
    x = _number(raw, key)
    if not float(x).is_integer():
        raise DomainError(f"{key}: expected an integer count, got {raw[key]!r}")
    return int(x)


def _counts(value: Any, key: str) -> list[int]:
    if isinstance(value, str):
        items: Iterable[Any] = [v for v in value.replace(",", " ").split() if v]
    elif isinstance(value, (list, tuple)):
        items = value
    else:
        items = [value]
    return [_count({key: v}, key) for v in items]


def _one_of(raw: Mapping[str, Any], *keys: str) -> str | None:
    present = [k for k in keys if k in raw]
    if len(present) > 1:
        raise DomainError(f"give only one of {', '.join(present)}")
    return present[0] if present else None


def _missing(*keys: str) -> DomainError:
    return DomainError(f"missing required key: {' or '.join(keys)}")


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------


def service_rate_from(raw: Mapping[str, Any]) -> float:
    key = _one_of(raw, "session_duration", "completion_rate")
    if key == "session_duration":
        return 1.0 / _positive(parse_quantity(raw[key], "time", key), key)
    if key == "completion_rate":
        return parse_quantity(raw[key], "rate", key)
    raise _missing("session_duration", "completion_rate")


def rho_from(raw: Mapping[str, Any]) -> float:
    """Offered load per user, from ``rho`` directly or from the workload keys."""
    if _one_of(raw, "rho", "arrival_rate", "interarrival_time") == "rho":
        rho = _number(raw, "rho")
        _require(rho > 0 and math.isfinite(rho), f"rho must be positive, got {rho}")
        return rho
    return workload_from(raw).rho


def workload_from(raw: Mapping[str, Any]) -> WorkloadParams:
    mu = service_rate_from(raw)
    key = _one_of(raw, "arrival_rate", "interarrival_time", "rho")
    if key == "arrival_rate":
        lam = parse_quantity(raw[key], "rate", key)
    elif key == "interarrival_time":
        lam = 1.0 / _positive(parse_quantity(raw[key], "time", key), key)
    elif key == "rho":
        lam = _number(raw, key) * mu
    else:
        raise _missing("arrival_rate", "interarrival_time", "rho")
    return WorkloadParams(arrival_rate=lam, service_rate=mu)


def link_from(raw: Mapping[str, Any]) -> dict[str, float]:
    """Link parameters other than capacity, keyed like :class:`ChannelParams` fields."""
    for k in ("packet_size", "background_rate", "tau"):
        if k not in raw:
            raise _missing(k)
    packet_bits = _positive(parse_quantity(raw["packet_size"], "size", "packet_size"),
                            "packet_size")
    key = _one_of(raw, "probe_interval", "probe_rate")
    if key == "probe_interval":
        r = 1.0 / _positive(parse_quantity(raw[key], "time", key), key)
    elif key == "probe_rate":
        r = parse_quantity(raw[key], "rate", key)
    else:
        raise _missing("probe_interval", "probe_rate")
    return {
        "packet_service_factor": 1.0 / packet_bits,
        "background_rate": parse_quantity(raw["background_rate"], "rate", "background_rate"),
        "probe_rate": r,
        "timeout_threshold": parse_quantity(raw["tau"], "time", "tau"),
    }


def channel_from(raw: Mapping[str, Any]) -> ChannelParams:
    if "capacity_base" not in raw:
        raise _missing("capacity_base")
    base = parse_quantity(raw["capacity_base"], "bandwidth", "capacity_base")
    extra = 0.0
    if "capacity_extra" in raw:
        extra = parse_quantity(raw["capacity_extra"], "bandwidth", "capacity_extra")
    return ChannelParams(capacity_base=base, capacity_extra=extra, **link_from(raw))


def layout_from(raw: Mapping[str, Any]) -> PoolLayout:
    if "populations" in raw:
        pops = _counts(raw["populations"], "populations")
    elif "population" in raw:
        sites = _count(raw, "sites") if "sites" in raw else 1
        pops = _spread(_count(raw, "population"), sites)
    else:
        raise _missing("populations", "population")
    lic = _counts(raw["licenses"], "licenses") if "licenses" in raw else None
    if lic is not None and len(lic) == 1 and len(pops) > 1:
        lic = _spread(lic[0], len(pops))
    return PoolLayout.from_lists(pops, lic)


def cost_from(raw: Mapping[str, Any]) -> CostModel:
    for k in ("alpha", "beta"):
        if k not in raw:
            raise _missing(k)
    n = _count(raw, "links_upgraded") if "links_upgraded" in raw else 1
    return CostModel(alpha=_number(raw, "alpha"), beta=_number(raw, "beta"), links_upgraded=n)


def sla_from(raw: Mapping[str, Any]) -> SlaTarget:
    if "success_min" not in raw:
        raise _missing("success_min")
    return SlaTarget(_number(raw, "success_min"))


def normalize(raw: Mapping[str, Any] | Scenario) -> Scenario:
    """Convert a human-unit config mapping into a :class:`Scenario`.

    Recognized keys (``|`` separates alternatives)::

        session_duration (time) | completion_rate (rate)
        arrival_rate (rate) | interarrival_time (time) | rho (number)
        capacity_base (bandwidth), capacity_extra (bandwidth, default 0)
        packet_size (size), background_rate (rate), tau (time)
        probe_interval (time) | probe_rate (rate)
        populations (list) | population (+ optional sites), licenses (list)
        alpha, beta (per Mbps), links_upgraded (default 1), success_min

    A :class:`Scenario` is returned unchanged.
    """
    if isinstance(raw, Scenario):
        return raw
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise DomainError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return Scenario(workload_from(raw), channel_from(raw), layout_from(raw),
                    cost_from(raw), sla_from(raw))


def denormalize(scenario: Scenario) -> dict[str, Any]:
    """Inverse of :func:`normalize`, written in canonical units."""
    w, ch, lay, cost, sla = scenario
    return {
        "completion_rate": format_quantity(w.service_rate, "rate"),
        "arrival_rate": format_quantity(w.arrival_rate, "rate"),
        "capacity_base": format_quantity(ch.capacity_base, "bandwidth"),
        "capacity_extra": format_quantity(ch.capacity_extra, "bandwidth"),
        "packet_size": format_quantity(1.0 / ch.packet_service_factor, "size"),
        "background_rate": format_quantity(ch.background_rate, "rate"),
        "probe_rate": format_quantity(ch.probe_rate, "rate"),
        "tau": format_quantity(ch.timeout_threshold, "time"),
        "populations": list(lay.populations),
        "licenses": list(lay.licenses),
        "alpha": cost.alpha,
        "beta": cost.beta,
        "links_upgraded": cost.links_upgraded,
        "success_min": sla.success_min,
    }


KNOWN_KEYS = frozenset({
    "session_duration", "completion_rate", "arrival_rate", "interarrival_time", "rho",
    "capacity_base", "capacity_extra", "packet_size", "background_rate", "tau",
    "probe_interval", "probe_rate", "populations", "population", "sites", "licenses",
    "alpha", "beta", "links_upgraded", "success_min",
})


def _positive(x: float, key: str) -> float:
    _require(x > 0, f"{key} must be positive, got {x}")
    return x


def load_config(path: str) -> dict[str, Any]:
    """Read a flat ``key = value`` config file (TOML syntax)."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise DomainError(f"{path}: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise DomainError(f"{path}: config must be flat, found tables {nested}")
    return data
