"""Grid evaluations that produce plot datasets as long-format rows."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

from .core import MBPS, ChannelParams, CostModel, DomainError, Infeasible, PoolLayout, SlaTarget, WorkloadParams
from .engset import allocate_exact, blocking_distributed, blocking_recursive
from .sla import max_timeout_for_sla, success_centralized
from .timeout import capacity_for_channel, max_timeout, timeout_probability, utilization

KINDS = ("blocking_vs_licenses", "timeout_vs_capacity", "timeout_vs_utilization",
         "success_surface", "cost_contours")
COLUMNS = ("sweep_kind", "series", "x_name", "x", "y_name", "y", "level")


class Row(NamedTuple):
    sweep_kind: str
    series: str
    x_name: str
    x: float
    y_name: str
    y: float
    level: float | None = None


@dataclass(frozen=True)
class Grid:
    """Inclusive arithmetic grid; point ``k`` is ``start + k * step``."""

    start: float
    stop: float
    step: float = 1.0

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"grid step must be > 0, got {self.step}")
        if self.stop < self.start:
            raise DomainError(f"empty grid: stop {self.stop} < start {self.start}")

    def __len__(self) -> int:
        return int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1

    def __iter__(self) -> Iterator[float]:
        return (self.start + k * self.step for k in range(len(self)))

    def integers(self) -> list[int]:
        pts = list(self)
        if any(not float(p).is_integer() for p in pts):
            raise DomainError(f"grid {self} must hold whole numbers")
        return [int(p) for p in pts]

    @classmethod
    def parse(cls, text: str) -> "Grid":
        """``"start:stop[:step]"``."""
        try:
            parts = [float(v) for v in text.split(":")]
        except ValueError:
            raise DomainError(f"bad grid {text!r}, expected start:stop[:step]") from None
        if len(parts) not in (2, 3):
            raise DomainError(f"bad grid {text!r}, expected start:stop[:step]")
        return cls(*parts)


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep. Capacities in Mbps; unused fields may stay ``None``.

    ``loads`` pairs a background rate (pkt/s) with its capacity grid for
    ``timeout_vs_utilization``; ``taus`` (seconds) defaults to the channel's
    threshold; ``levels`` are the cost lines for ``cost_contours``.
    """

    kind: str
    workload: WorkloadParams | None = None
    channel: ChannelParams | None = None
    population: int | None = None
    sites: int = 2
    licenses: Grid | None = None
    capacity: Grid | None = None
    taus: tuple[float, ...] = ()
    loads: tuple[tuple[float, Grid], ...] = ()
    levels: tuple[float, ...] = ()
    cost: CostModel | None = None
    sla: SlaTarget | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown sweep kind {self.kind!r}; choose from {', '.join(KINDS)}")
        needs = {
            "blocking_vs_licenses": ("workload", "population", "licenses"),
            "timeout_vs_capacity": ("workload", "channel", "capacity"),
            "timeout_vs_utilization": ("workload", "channel", "loads"),
            "success_surface": ("workload", "channel", "population", "licenses", "capacity"),
            "cost_contours": ("workload", "channel", "population", "licenses", "capacity",
                              "levels", "cost", "sla"),
        }[self.kind]
        missing = [n for n in needs if getattr(self, n) in (None, ())]
        if missing:
            raise DomainError(f"{self.kind} sweep needs: {', '.join(missing)}")
        if self.sites < 1:
            raise DomainError(f"sites must be >= 1, got {self.sites}")


Cell = Callable[[], "list[Row]"]


def _blocking_cells(spec: SweepSpec) -> list[Cell]:
    rho, S, kind = spec.workload.rho, spec.population, spec.kind
    cells: list[Cell] = []
    for L in spec.licenses.integers():
        cells.append(lambda L=L: [Row(kind, "centralized", "licenses", L, "blocking",
                                      blocking_recursive(L, S, rho))])
    for L in spec.licenses.integers():
        layout = PoolLayout.equal_split(S, spec.sites, L)
        cells.append(lambda L=L, layout=layout: [Row(kind, "distributed", "licenses", L,
                                                     "blocking", blocking_distributed(layout, rho))])
    return cells


def _timeout_capacity_cells(spec: SweepSpec) -> list[Cell]:
    mu = spec.workload.service_rate
    cells: list[Cell] = []
    for tau in spec.taus or (spec.channel.timeout_threshold,):
        ch = ChannelParams(spec.channel.capacity_base, spec.channel.packet_service_factor,
                           spec.channel.background_rate, spec.channel.probe_rate, tau)
        for c in spec.capacity:
            cells.append(lambda ch=ch, c=c, tau=tau: [Row(
                spec.kind, f"tau={tau!r}", "capacity_mbps", c, "timeout",
                timeout_probability(ch.at_capacity(c * MBPS), mu))])
    return cells


def _timeout_utilization_cells(spec: SweepSpec) -> list[Cell]:
    mu = spec.workload.service_rate
    cells: list[Cell] = []
    for background, grid in spec.loads:
        ch = ChannelParams(spec.channel.capacity_base, spec.channel.packet_service_factor,
                           background, spec.channel.probe_rate, spec.channel.timeout_threshold)
        for c in grid:
            def cell(ch=ch, c=c, background=background):
                link = ch.at_capacity(c * MBPS)
                return [Row(spec.kind, f"background={background!r}", "utilization",
                            utilization(link), "timeout", timeout_probability(link, mu))]
            cells.append(cell)
    return cells


def _surface_cells(spec: SweepSpec) -> list[Cell]:
    cells: list[Cell] = []
    for L in spec.licenses.integers():
        for c in spec.capacity:
            cells.append(lambda L=L, c=c: [Row(
                spec.kind, f"L={L}", "capacity_mbps", c, "success",
                success_centralized(spec.workload, spec.channel.at_capacity(c * MBPS), L,
                                    spec.population).success)])
    return cells


def constraint_capacity(workload: WorkloadParams, channel: ChannelParams, licenses: int,
                        population: int, success_min: float) -> float | None:
    """Capacity (bits/s) at which the centralized success equals ``success_min``.

    ``None`` when no capacity gives equality: blocking alone breaks the SLA, or
    even a saturated link meets it.
    """
    b = blocking_recursive(licenses, population, workload.rho)
    try:
        p_max = max_timeout_for_sla(success_min, b)
    except Infeasible:
        return None
    if p_max >= max_timeout(workload.service_rate, channel.probe_rate):
        return None
    return capacity_for_channel(p_max, channel, workload.service_rate)


def _contour_cells(spec: SweepSpec) -> list[Cell]:
    kind, cost, c0 = spec.kind, spec.cost, spec.channel.capacity_base / MBPS
    slope = cost.beta * cost.links_upgraded
    cells: list[Cell] = []
    for level in spec.levels:
        def line(level=level):
            rows = []
            for L in spec.licenses.integers():
                if slope == 0:
                    continue
                c = c0 + (level - cost.alpha * L) / slope
                if c >= c0:
                    rows.append(Row(kind, "cost", "licenses", L, "capacity_mbps", c, level))
            return rows
        cells.append(line)

    def centralized_locus(L):
        c = constraint_capacity(spec.workload, spec.channel, L, spec.population,
                                spec.sla.success_min)
        return [] if c is None else [Row(kind, "s_c", "licenses", L, "capacity_mbps", c / MBPS)]

    cells.extend(lambda L=L: centralized_locus(L) for L in spec.licenses.integers())

    pops = PoolLayout.equal_split(spec.population, spec.sites).populations

    def distributed_locus(c):
        # distributed success does not depend on capacity: the locus is vertical
        total = sum(allocate_exact(pops, spec.workload.rho, 1.0 - spec.sla.success_min))
        return [Row(kind, "s_d", "licenses", total, "capacity_mbps", c)]

    cells.extend(lambda c=c: distributed_locus(c) for c in spec.capacity)
    return cells


_BUILDERS = {
    "blocking_vs_licenses": _blocking_cells,
    "timeout_vs_capacity": _timeout_capacity_cells,
    "timeout_vs_utilization": _timeout_utilization_cells,
    "success_surface": _surface_cells,
    "cost_contours": _contour_cells,
}


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[Row]:
    """Evaluate every grid cell; row order is fixed by grid index, not by scheduling."""
    cells = _BUILDERS[spec.kind](spec)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            chunks = list(ex.map(lambda f: f(), cells))
    else:
        chunks = [f() for f in cells]
    return [row for chunk in chunks for row in chunk]
