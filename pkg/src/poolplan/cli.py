"""Command-line front end.

Every subcommand reads a flat config file (``--config`` or ``$POOLPLAN_CONFIG``),
lets flags override individual keys, calls one library operation and prints
the result. Exit status: 0 success, 1 infeasible SLA, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
import warnings
from typing import Any, Sequence

from . import __version__, engset, montecarlo, planner, sla, sweep, timeout
from .core import (MBPS, DomainError, Infeasible, PoolLayout, UnitError, UnstableChannelWarning,
                   WorkloadParams, channel_from, cost_from, layout_from, link_from, load_config,
                   parse_quantity, rho_from, service_rate_from, sla_from, workload_from)

CONFIG_ENV = "POOLPLAN_CONFIG"

# (flag, config key, help)
SCENARIO_FLAGS = [
    ("--session-duration", "session_duration", "mean target session duration, e.g. '8 h'"),
    ("--completion-rate", "completion_rate", "session completion rate, e.g. '0.125 1/h'"),
    ("--interarrival-time", "interarrival_time", "mean idle time per user, e.g. '8 h'"),
    ("--arrival-rate", "arrival_rate", "per-user request rate, e.g. '0.125 1/h'"),
    ("--rho", "rho", "offered load per user (lambda/mu)"),
    ("--capacity-base", "capacity_base", "initial link capacity, e.g. '10 Mbps'"),
    ("--capacity-extra", "capacity_extra", "added link capacity, e.g. '5 Mbps'"),
    ("--packet-size", "packet_size", "mean background packet size, e.g. '1250 B'"),
    ("--background-rate", "background_rate", "background packet rate, e.g. '900 pkt/s'"),
    ("--probe-interval", "probe_interval", "time between renewal probes, e.g. '120 s'"),
    ("--probe-rate", "probe_rate", "renewal probe rate, e.g. '0.5 1/min'"),
    ("--tau", "tau", "probe timeout threshold, e.g. '0.01 s'"),
    ("--population", "population", "total number of users"),
    ("--sites", "sites", "number of sites the population is split across"),
    ("--populations", "populations", "per-site populations, e.g. '15,15'"),
    ("--licenses", "licenses", "license count, or per-site counts '11,10'"),
    ("--alpha", "alpha", "cost per license"),
    ("--beta", "beta", "cost per Mbps of added capacity"),
    ("--links-upgraded", "links_upgraded", "number of links upgraded"),
    ("--success-min", "success_min", "SLA success probability"),
]


def fmt(x: Any) -> str:
    """Locale-independent rendering: ints as-is, floats with 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.11e}"
    if isinstance(x, (tuple, list)):
        return ",".join(fmt(v) for v in x)
    return str(x)


def _json_value(x: Any) -> Any:
    if isinstance(x, float):
        return float(f"{x:.11e}")
    if isinstance(x, (tuple, list)):
        return [_json_value(v) for v in x]
    return x


class Context:
    """Merged config (file keys overridden by flags) plus output helpers."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        path = args.config or os.environ.get(CONFIG_ENV)
        self.raw: dict[str, Any] = load_config(path) if path else {}
        self.from_flags: dict[str, str] = {}  # config key -> flag that set it
        for flag, key, _ in SCENARIO_FLAGS:
            value = getattr(args, key, None)
            if value is not None:
                self.raw[key] = value
                self.from_flags[key] = flag
        if getattr(args, "capacity", None) is not None and "capacity_base" not in self.raw:
            self.raw["capacity_base"] = args.capacity
            self.from_flags["capacity_base"] = "--capacity"
        self.seed: int | None = None

    def channel(self):
        ch = channel_from(self.raw)
        if getattr(self.args, "capacity", None) is not None:
            ch = ch.at_capacity(parse_quantity(self.args.capacity, "bandwidth", "--capacity"))
        return ch

    def layout(self) -> PoolLayout:
        return layout_from(self.raw)


def _records_text(records: list[dict[str, Any]]) -> str:
    blocks = ["\n".join(f"{k} = {fmt(v)}" for k, v in rec.items()) for rec in records]
    return "\n\n".join(blocks) + "\n"


def _records_csv(records: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    fields = list(dict.fromkeys(k for rec in records for k in rec))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for rec in records:
        w.writerow([fmt(rec[k]) if k in rec else "" for k in fields])
    return buf.getvalue()


def render(records: list[dict[str, Any]], fmt_name: str) -> str:
    if fmt_name == "json":
        data = [{k: _json_value(v) for k, v in rec.items()} for rec in records]
        return json.dumps(data if len(data) > 1 else data[0], indent=2) + "\n"
    if fmt_name == "csv":
        return _records_csv(records)
    return _records_text(records)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_blocking(ctx: Context) -> list[dict[str, Any]]:
    layout = ctx.layout()
    rho = rho_from(ctx.raw)
    res = engset.blocking(layout.total_licenses, layout.population, rho, ctx.args.method)
    return [{"population": layout.population, "licenses": layout.total_licenses, "rho": rho,
             "method": res.method.value, "blocking": res.probability}]


def cmd_blocking_dist(ctx: Context) -> list[dict[str, Any]]:
    layout = ctx.layout()
    rho = rho_from(ctx.raw)
    return [{"populations": layout.populations, "licenses": layout.licenses, "rho": rho,
             "blocking": engset.blocking_distributed(layout, rho)}]


def cmd_timeout(ctx: Context) -> list[dict[str, Any]]:
    ch = ctx.channel()
    mu = service_rate_from(ctx.raw)
    return [{"capacity_mbps": ch.capacity / MBPS, "utilization": timeout.utilization(ch),
             "stable": ch.stable, "probe_success": timeout.probe_success(ch),
             "timeout": timeout.timeout_probability(ch, mu)}]


def cmd_capacity(ctx: Context) -> list[dict[str, Any]]:
    if ctx.args.p_target is None:
        return _capacity_for_sla(ctx)
    link = link_from(ctx.raw)
    mu = service_rate_from(ctx.raw)
    c = timeout.capacity_for_timeout(ctx.args.p_target, mu, link["probe_rate"],
                                     link["timeout_threshold"], link["background_rate"],
                                     link["packet_service_factor"])
    rec: dict[str, Any] = {"p_target": ctx.args.p_target, "capacity_mbps": c / MBPS}
    if "capacity_base" in ctx.raw:
        base = parse_quantity(ctx.raw["capacity_base"], "bandwidth", "capacity_base")
        rec["capacity_extra_mbps"] = max(0.0, c - base) / MBPS
    return [rec]


def _capacity_for_sla(ctx: Context) -> list[dict[str, Any]]:
    # smallest link meeting the SLA for a central pool with the given licenses
    w, ch, layout = workload_from(ctx.raw), ctx.channel(), ctx.layout()
    target = sla_from(ctx.raw)
    b = engset.blocking_recursive(layout.total_licenses, layout.population, w.rho)
    p_max = sla.max_timeout_for_sla(target.success_min, b)
    extra = planner.required_extra_capacity(w, ch, b, target.success_min)
    return [{"success_min": target.success_min, "blocking": b, "p_max": p_max,
             "capacity_mbps": (ch.capacity_base + extra) / MBPS, "capacity_extra_mbps": extra / MBPS}]


def cmd_success(ctx: Context) -> list[dict[str, Any]]:
    w = workload_from(ctx.raw)
    layout = ctx.layout()
    if ctx.args.architecture == "distributed":
        rep = sla.success_distributed(w, layout)
    else:
        rep = sla.success_centralized(w, ctx.channel(), layout.total_licenses, layout.population)
    return [{"architecture": rep.architecture.value, "blocking": rep.blocking,
             "timeout": rep.timeout, "success": rep.success, "stable": rep.stable}]


def _plan_record(res: planner.PlanResult) -> dict[str, Any]:
    return {"architecture": res.architecture.value, "licenses": res.licenses_total,
            "licenses_per_pool": res.licenses_per_pool,
            "capacity_extra_mbps": res.capacity_extra_mbps, "cost": res.cost,
            "achieved_success": res.achieved_success, "blocking": res.blocking,
            "timeout": res.timeout}


def cmd_optimize(ctx: Context) -> list[dict[str, Any]]:
    w, ch = workload_from(ctx.raw), ctx.channel()
    pops = ctx.layout().populations
    cost, target = cost_from(ctx.raw), sla_from(ctx.raw)
    arch = ctx.args.architecture
    if arch == "centralized":
        return [_plan_record(planner.optimize_centralized(w, ch, sum(pops), cost, target))]
    if arch == "distributed":
        return [_plan_record(planner.optimize_distributed(w, pops, cost, target))]
    res = planner.plan(w, ch, pops, cost, target)
    out = [{"chosen": True, **_plan_record(res)}]
    if res.alternative is not None:
        out.append({"chosen": False, **_plan_record(res.alternative)})
    return out


def cmd_simulate(ctx: Context) -> list[dict[str, Any]]:
    a = ctx.args
    ctx.seed = a.seed
    cfg = montecarlo.SimConfig(seed=a.seed, replications=a.replications, horizon=a.horizon,
                               warmup_fraction=a.warmup, workers=a.workers)
    if a.what == "engset":
        layout, w = ctx.layout(), workload_from(ctx.raw)
        est = montecarlo.simulate_engset(layout.population, layout.total_licenses, w, cfg)
        analytic = engset.blocking_recursive(layout.total_licenses, layout.population, w.rho)
    elif a.what == "timeout":
        ch, mu = ctx.channel(), service_rate_from(ctx.raw)
        est = montecarlo.simulate_timeout(ch, mu, cfg, allow_unstable=a.allow_unstable,
                                          method=a.method)
        analytic = timeout.timeout_probability(ch, mu)
    else:
        layout, w, ch = ctx.layout(), workload_from(ctx.raw), ctx.channel()
        est = montecarlo.simulate_success_centralized(
            w, ch, layout.total_licenses, layout.population, cfg, allow_unstable=a.allow_unstable)
        analytic = sla.success_centralized(w, ch, layout.total_licenses, layout.population).success
    return [{"quantity": a.what, "mean": est.mean, "ci99_halfwidth": est.ci99_halfwidth,
             "samples": est.samples, "replications": cfg.replications, "analytic": analytic,
             "covered": est.covers(analytic), "seed": a.seed, "rng": est.rng}]


def _parse_loads(text: str) -> tuple[tuple[float, sweep.Grid], ...]:
    loads = []
    for item in text.split(","):
        try:
            rate, grid = item.split("@")
        except ValueError:
            raise DomainError(f"--loads: expected RATE@start:stop[:step], got {item!r}") from None
        loads.append((parse_quantity(rate.strip(), "rate", "--loads"), sweep.Grid.parse(grid)))
    return tuple(loads)


def _floats(text: str | None, flag: str) -> tuple[float, ...]:
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise DomainError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(ctx: Context) -> list[dict[str, Any]]:
    a, raw = ctx.args, ctx.raw
    kind = a.kind
    kw: dict[str, Any] = {"kind": kind}
    if kind == "blocking_vs_licenses":
        layout = ctx.layout()
        kw.update(population=layout.population, sites=len(layout.sites))
        kw["workload"] = _rho_workload(raw)
    else:
        kw["workload"] = workload_from(raw)
    if kind != "blocking_vs_licenses":
        kw["channel"] = ctx.channel()
    if kind in ("success_surface", "cost_contours"):
        layout = ctx.layout()
        kw.update(population=layout.population, sites=len(layout.sites))
    if kind == "cost_contours":
        kw.update(cost=cost_from(raw), sla=sla_from(raw), levels=_floats(a.levels, "--levels"))
    if a.licenses_grid:
        kw["licenses"] = sweep.Grid.parse(a.licenses_grid)
    if a.capacity_grid:
        kw["capacity"] = sweep.Grid.parse(a.capacity_grid)
    if a.taus:
        kw["taus"] = tuple(parse_quantity(t.strip(), "time", "--taus") for t in a.taus.split(","))
    if a.loads:
        kw["loads"] = _parse_loads(a.loads)
    rows = sweep.run_sweep(sweep.SweepSpec(**kw), workers=a.workers)
    return [dict(zip(sweep.COLUMNS, r)) for r in rows]


def _rho_workload(raw):
    # blocking only depends on rho; the time scale is irrelevant
    try:
        return workload_from(raw)
    except DomainError:
        return WorkloadParams.from_rho(rho_from(raw), 1.0)


COMMANDS = {
    "blocking": cmd_blocking, "blocking-dist": cmd_blocking_dist, "timeout": cmd_timeout,
    "capacity": cmd_capacity, "success": cmd_success, "optimize": cmd_optimize,
    "simulate": cmd_simulate, "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"config file (default: ${CONFIG_ENV})")
    common.add_argument("--format", choices=("text", "json", "csv"), default=None)
    common.add_argument("--output", "-o", help="write results here instead of stdout")
    common.add_argument("--manifest", help="write a JSON run manifest here")
    grp = common.add_argument_group("scenario (override config keys)")
    for flag, key, help_ in SCENARIO_FLAGS:
        grp.add_argument(flag, dest=key, metavar="VALUE", help=help_)
    grp.add_argument("--capacity", metavar="VALUE", help="total link capacity, e.g. '20 Mbps'")

    p = argparse.ArgumentParser(prog="poolplan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"poolplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("blocking", parents=[common], help="Engset blocking for one pool")
    s.add_argument("--method", choices=("recursive", "direct"), default="recursive")
    sub.add_parser("blocking-dist", parents=[common], help="weighted blocking over pools")
    sub.add_parser("timeout", parents=[common], help="congestion timeout probability")
    s = sub.add_parser("capacity", parents=[common],
                       help="capacity for a timeout target, or for --success-min if no target")
    s.add_argument("--p-target", type=float)
    s = sub.add_parser("success", parents=[common], help="SLA success probability")
    s.add_argument("--architecture", choices=("centralized", "distributed"),
                   default="centralized")
    s = sub.add_parser("optimize", parents=[common], help="minimum-cost plan")
    s.add_argument("--architecture", choices=("both", "centralized", "distributed"),
                   default="both")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo cross-check")
    s.add_argument("what", choices=("engset", "timeout", "success"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replications", type=int, default=20)
    s.add_argument("--horizon", type=int, default=50_000,
                   help="arrivals (engset) or sessions (timeout) per replication")
    s.add_argument("--warmup", type=float, default=0.1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--method", choices=("geometric", "explicit"), default="geometric")
    s.add_argument("--allow-unstable", action="store_true")
    s = sub.add_parser("sweep", parents=[common], help="plot datasets as CSV")
    s.add_argument("--kind", choices=sweep.KINDS, required=True)
    s.add_argument("--licenses-grid", help="start:stop[:step]")
    s.add_argument("--capacity-grid", help="start:stop[:step] in Mbps")
    s.add_argument("--taus", help="comma-separated thresholds, e.g. '0.01 s,0.05 s'")
    s.add_argument("--loads", help="RATE@start:stop[:step],... e.g. '900 pkt/s@10:25:1'")
    s.add_argument("--levels", help="comma-separated cost levels")
    s.add_argument("--workers", type=int, default=1)
    return p


def _with_flag_names(message: str, ctx: Context | None) -> str:
    if ctx is not None:
        for key, flag in ctx.from_flags.items():
            if message.startswith(f"{key}:"):
                return f"{flag}{message[len(key):]}"
    return message


def _resolved(raw: dict[str, Any]) -> dict[str, Any]:
    # whichever parts of the scenario the merged config fully determines, in SI units
    out = {}
    for name, build in (("workload", workload_from), ("channel", channel_from),
                        ("layout", layout_from), ("cost", cost_from), ("sla", sla_from)):
        try:
            out[name] = dataclasses.asdict(build(raw))
        except (UnitError, DomainError):
            pass
    return out


def _write_manifest(path: str, ctx: Context, argv: Sequence[str], text: str, target: str) -> None:
    manifest = {
        "tool": "poolplan",
        "version": __version__,
        "subcommand": ctx.args.command,
        "argv": list(argv),
        "config": ctx.raw,
        "resolved": _resolved(ctx.raw),
        "seed": ctx.seed,
        "outputs": {target: hashlib.sha256(text.encode()).hexdigest()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    ctx = None
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", UnstableChannelWarning)
            ctx = Context(args)
            records = COMMANDS[args.command](ctx)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except (UnitError, DomainError, OverflowError, OSError) as exc:
        print(f"error: {_with_flag_names(str(exc), ctx)}", file=sys.stderr)
        return 2

    out_fmt = args.format or ("csv" if args.command == "sweep" else "text")
    text = render(records, out_fmt)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    manifest = args.manifest or (f"{args.output}.manifest.json" if args.output else None)
    if manifest:
        _write_manifest(manifest, ctx, argv, text, args.output or "stdout")
    return 0


def main() -> None:
    sys.exit(run())
