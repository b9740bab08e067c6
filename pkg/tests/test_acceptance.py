"""Acceptance criteria 1 to 13, one test each.

Every test prints a single ``criterion N PASS|FAIL`` line with the measured
numbers; the same lines are repeated in the pytest terminal summary.
"""

import math
import random
import subprocess
import sys
from itertools import product
from pathlib import Path

import numpy as np

from poolplan.core import ChannelParams, CostModel, PoolLayout, SlaTarget, WorkloadParams
from poolplan.engset import (allocate_exhaustive, allocate_greedy, blocking_direct,
                             blocking_distributed, blocking_recursive, time_congestion)
from poolplan.montecarlo import SimConfig, simulate_engset, simulate_timeout
from poolplan.planner import optimize_centralized, plan
from poolplan.sla import Architecture
from poolplan.timeout import ProbeModel, capacity_for_timeout, max_timeout, timeout_probability

from conftest import (ACCEPTANCE, BACKGROUND, C0, DELTA_MBPS, M, MU, PROBE_RATE, TAU,
                      grid_optimum)

ROOT = Path(__file__).resolve().parent.parent
SEED = 2026
# 40 replications x 25 000 = 10^6 events per point
BIG = SimConfig(seed=SEED, replications=40, horizon=25_000)
# frozen from a 50-digit mpmath evaluation of the closed form
P_20MBPS = 3.9841263813866546692e-3


def verdict(n, title, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def link(mbps, tau=TAU, background=BACKGROUND):
    return ChannelParams(mbps * 1e6, M, background, PROBE_RATE, tau)


def test_01_engset_oracle_equivalence():
    worst = 0.0
    for S in range(1, 26):
        for L in range(S + 1):
            for rho in (0.1, 0.5, 0.8, 1, 2):
                worst = max(worst, abs(blocking_recursive(L, S, rho) - blocking_direct(L, S, rho)))
    verdict(1, "recursive vs direct Engset", worst <= 1e-10, f"max |diff| = {worst:.3e}")


def test_02_blocking_simulation_agreement():
    w = WorkloadParams.from_rho(0.8, MU)
    misses, parts = [], []
    for L in (5, 10, 15, 20, 25, 30):
        est = simulate_engset(30, L, w, BIG)
        exact = blocking_recursive(L, 30, 0.8)
        parts.append(f"L={L} {est.mean:.5f}+-{est.ci99_halfwidth:.1e} vs {exact:.5f}")
        if not (est.samples >= 10**6 and est.covers(exact)):
            misses.append(L)
    verdict(2, "Engset simulation covers analytic", not misses,
            f"seed {SEED}, 10^6 arrivals/point; " + "; ".join(parts))


def test_03_licensing_multiplexing_gain():
    cen = {L: blocking_recursive(L, 30, 0.8) for L in range(2, 30)}
    dis = {L: blocking_distributed(PoolLayout.equal_split(30, 2, L), 0.8) for L in range(2, 30)}
    worse = [L for L in cen if dis[L] < cen[L]]
    gap = {L: math.log10(dis[L]) - math.log10(cen[L]) for L in (10, 25)}
    verdict(3, "distributed blocking >= centralized", not worse and gap[25] > gap[10],
            f"violations {worse}; log10 gap L=10 {gap[10]:.4f}, L=25 {gap[25]:.4f}")


def test_04_timeout_simulation_and_golden():
    misses, parts = [], []
    for mbps in (12, 15, 18, 20, 25):
        ch = link(mbps)
        est = simulate_timeout(ch, MU, BIG)
        exact = timeout_probability(ch, MU)
        parts.append(f"C={mbps} {est.mean:.3e}+-{est.ci99_halfwidth:.1e} vs {exact:.3e}")
        if not (est.samples >= 10**6 and est.covers(exact)):
            misses.append(mbps)
    p20 = timeout_probability(link(20), MU)
    golden = abs(p20 - 3.98e-3) <= 0.02 * 3.98e-3 and math.isclose(p20, P_20MBPS, rel_tol=1e-12)
    verdict(4, "timeout simulation covers analytic; p(20 Mbps) = 3.98e-3 +-2%",
            not misses and golden, f"p(20 Mbps) = {p20:.6e}; " + "; ".join(parts))


def test_05_capacity_round_trip():
    top = max_timeout(MU, PROBE_RATE)
    targets = np.logspace(-12, math.log10(top * (1 - 1e-6)), 200)
    worst = 0.0
    for p in targets:
        c = capacity_for_timeout(float(p), MU, PROBE_RATE, TAU, BACKGROUND, M)
        ch = ChannelParams(c, M, BACKGROUND, PROBE_RATE, TAU)
        worst = max(worst, abs(timeout_probability(ch, MU) - p) / p)
    verdict(5, "capacity inversion round trip", worst <= 1e-9,
            f"200 targets in [1e-12, {targets[-1]:.6f}], max rel err {worst:.2e}")


def test_06_corner_identities():
    limit = math.exp(-MU / PROBE_RATE)
    q0 = ProbeModel(0.0, PROBE_RATE, MU).timeout_probability()
    q1 = ProbeModel(1.0, PROBE_RATE, MU).timeout_probability()
    edge = BACKGROUND / M
    near = [timeout_probability(ChannelParams(edge * (1 + eps), M, BACKGROUND, PROBE_RATE, TAU), MU)
            for eps in (1e-3, 1e-6, 1e-9)]
    approach = all(a < b for a, b in zip(near, near[1:])) and abs(near[-1] - limit) <= 1e-9 * limit
    ok = q0 == limit and q1 == 0.0 and approach
    verdict(6, "corner identities", ok,
            f"q=0 -> {q0!r} (e^-mu/r = {limit!r}); q=1 -> {q1}; "
            f"C = (Lambda/M)(1+1e-9) -> {near[-1]!r}")


def test_07_timeout_shape():
    grid = np.arange(10.0, 25.0001, 0.1)
    p01 = [timeout_probability(link(c, 0.01), MU) for c in grid]
    p05 = [timeout_probability(link(c, 0.05), MU) for c in grid]
    decreasing = all(a > b for s in (p01, p05) for a, b in zip(s, s[1:]))
    ordered = all(b < a for a, b in zip(p01, p05))
    need = {tau: capacity_for_timeout(1e-3, MU, PROBE_RATE, tau, BACKGROUND, M) / 1e6
            for tau in (0.01, 0.05)}
    ratio = need[0.01] / need[0.05]
    verdict(7, "timeout decreasing in C and tau; capacity ratio >= 1.5",
            decreasing and ordered and ratio >= 1.5,
            f"C(p=1e-3): tau=0.01 {need[0.01]:.4f} Mbps, tau=0.05 {need[0.05]:.4f} Mbps, "
            f"ratio {ratio:.3f}")


def test_08_networking_multiplexing_gain():
    parts, ok = [], True
    for u in (0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
        fast = 900 / (M * u) / 1e6
        slow = 90 / (M * u) / 1e6
        assert 10 - 1e-9 <= fast <= 25 and 1 - 1e-9 <= slow <= 15
        pf = timeout_probability(link(fast, background=900), MU)
        ps = timeout_probability(link(slow, background=90), MU)
        ok &= pf < ps
        parts.append(f"u={u} {pf:.2e} < {ps:.2e}")
    verdict(8, "busier fast link times out less at equal utilization", ok, "; ".join(parts))


def _min_total(per_pool, bound):
    # smallest L1 + L2 over 0..15 each, ties broken by lower weighted blocking
    best = None
    for a in product(range(16), repeat=2):
        bd = (per_pool(a[0]) + per_pool(a[1])) / 2
        if bd <= bound and (best is None or (sum(a), bd) < (sum(best[0]), best[1])):
            best = (a, bd)
    return best


def test_09_distributed_optimum():
    greedy = allocate_greedy([15, 15], 1.0, 0.05)
    exhaustive = allocate_exhaustive([15, 15], 1.0, 0.05)
    exact = _min_total(lambda L: blocking_direct(L, 15, 1), 0.05)
    printed = _min_total(lambda L: time_congestion(L, 15, 1.0), 0.05)
    total = sum(greedy)
    ok = sum(greedy) == sum(exhaustive) and total in (22, 23)
    verdict(9, "greedy == exhaustive and L* in {22, 23}", ok,
            f"greedy {greedy} (L*={total}), exhaustive {exhaustive} (L*={sum(exhaustive)}), "
            f"b_d = {exact[1]:.5f}; the (S-j+1) recursion variant gives L*={sum(printed[0])}")


def _reference_scenario(alpha, beta):
    w = WorkloadParams.from_rho(1.0, MU)
    ch = ChannelParams(C0, M, BACKGROUND, PROBE_RATE, TAU)
    return w, ch, [15, 15], CostModel(alpha, beta, 1), SlaTarget(0.95)


def test_10_planner_direction():
    expect = {(1, 2): Architecture.distributed, (1, 10): Architecture.distributed,
              (10, 2): Architecture.centralized}
    parts, ok = [], True
    for (alpha, beta), arch in expect.items():
        res = plan(*_reference_scenario(alpha, beta))
        arms = {res.architecture: res, res.alternative.architecture: res.alternative}
        c, d = arms[Architecture.centralized], arms[Architecture.distributed]
        ok &= res.architecture is arch
        parts.append(f"c={alpha}L+{beta}C': chose {res.architecture.value}, "
                     f"c_c*={c.cost:.2f} (L={c.licenses_total}, C'={c.capacity_extra_mbps:.4f} Mbps), "
                     f"c_d*={d.cost:.2f} (L={d.licenses_total} {d.licenses_per_pool})")
    verdict(10, "planner picks the same architectures", ok, "; ".join(parts))


def test_11_planner_matches_grid_search():
    rng = random.Random(SEED)
    worst, bad = 0.0, []
    for i in range(10):
        S = rng.randint(5, 30)
        w = WorkloadParams.from_rho(rng.choice([0.3, 0.5, 0.8, 1.0, 1.5]), MU)
        ch = ChannelParams(rng.choice([5e6, 10e6, 12e6]), M, BACKGROUND, PROBE_RATE,
                           rng.choice([0.01, 0.02, 0.05]))
        cost = CostModel(rng.uniform(0.5, 10), rng.uniform(0.5, 10), rng.randint(1, 3))
        s = rng.choice([0.8, 0.9, 0.95, 0.99])
        res = optimize_centralized(w, ch, S, cost, SlaTarget(s))
        g = grid_optimum(w, ch, S, cost, s)
        tol = DELTA_MBPS * cost.beta * cost.links_upgraded
        gap = g[0] - res.cost
        worst = max(worst, abs(gap) / tol)
        if not (-1e-9 <= gap <= tol + 1e-9):
            bad.append(i)
    verdict(11, "centralized optimum within one grid step of 2-D search", not bad,
            f"10 scenarios, worst |gap| = {worst:.3f} grid steps, failures {bad}")


def test_12_scale_invariance():
    bad = []
    for alpha, beta in ((1, 2), (1, 10), (10, 2)):
        w, ch, pops, cost, sla = _reference_scenario(alpha, beta)
        base = plan(w, ch, pops, cost, sla)
        for k in (0.5, 3, 10):
            r = plan(w, ch, pops, cost.scaled(k), sla)
            if (r.architecture, r.licenses_total, r.capacity_extra) != \
                    (base.architecture, base.licenses_total, base.capacity_extra):
                bad.append((alpha, beta, k))
    verdict(12, "plan unchanged under cost scaling", not bad,
            f"k in {{0.5, 3, 10}} on three cost lines, mismatches {bad}")


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "poolplan", *argv], cwd=ROOT, check=True,
                          capture_output=True).stdout


def test_13_cli_determinism():
    sim = ["simulate", "engset", "--config", "configs/fig5.cfg", "--licenses", "20",
           "--session-duration", "8 h", "--replications", "8", "--horizon", "20000",
           "--seed", str(SEED)]
    sweep = ["sweep", "--kind", "cost_contours", "--config", "configs/fig6b.cfg",
             "--licenses-grid", "15:30", "--capacity-grid", "10:25:0.5", "--levels", "21,23,29"]
    sims = {_cli(*sim), _cli(*sim), _cli(*sim, "--workers", "4")}
    sweeps = {_cli(*sweep), _cli(*sweep), _cli(*sweep, "--workers", "4")}
    verdict(13, "simulate and sweep output byte-identical", len(sims) == 1 and len(sweeps) == 1,
            f"{len(sims)} distinct simulate outputs, {len(sweeps)} distinct sweep outputs "
            "over two runs and a 4-worker run")
