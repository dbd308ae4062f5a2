"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line listing the
sub-checks that failed, then asserts.  The simulation criteria take a few
minutes each; ``-m "not slow"`` skips them.
"""
import itertools
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import CONFIGS, generic_network, two_station
from evshare import mva, productform
from evshare.chargers import allocate_chargers, allocation_objective
from evshare.cli import main
from evshare.distributions import TimeLaw
from evshare.economics import Economics, FleetCost
from evshare.fleet import ThroughputCurve, optimal_fleet_size, profit
from evshare.network import visit_ratios, visit_ratios_exact
from evshare.scenarios import downtown_suburb_network, symmetric_network
from evshare.selection import zero_inflated_delays
from evshare.sim import SimConfig, simulate, two_queue_charger_experiment, two_queue_network
from oracles import brute_force_g, ctmc_stationary, exhaustive_allocation

SLACK = 1e-9


class Checks:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.items = []
        self.t0 = time.perf_counter()

    def add(self, label, ok, detail=""):
        self.items.append((label, bool(ok), detail))

    def runtime(self, limit):
        took = time.perf_counter() - self.t0
        self.add(f"runtime < {limit:g} s", took < limit, f"{took:.1f} s")

    def finish(self, capsys):
        failed = [(lab, det) for lab, ok, det in self.items if not ok]
        status = "FAIL" if failed else "PASS"
        line = f"criterion {self.number}: {status} ({self.title}; {len(self.items)} checks"
        if failed:
            line += "; failed: " + "; ".join(f"{lab} [{det}]" if det else lab
                                             for lab, det in failed)
        with capsys.disabled():
            print("\n" + line + ")")
        assert not failed, line


# 1 -----------------------------------------------------------------------

def test_criterion_1_visit_ratios(capsys):
    c = Checks(1, "visit ratios, 60 stations")
    m = symmetric_network()
    exact = visit_ratios_exact(m)
    for kind, idx, want in [("FS", m.fs, Fraction(1, 420)), ("SS", m.ss, Fraction(1, 140)),
                            ("IS", m.is_, Fraction(1, 8260))]:
        got = {exact[i] for i in idx}
        c.add(f"{kind} = {want}", got == {want}, f"got {sorted(got)[:2]}")
    lam = visit_ratios(m)
    want = np.array([float(x) for x in exact])
    c.add("floating point within 1e-12", np.max(np.abs(lam / want - 1)) <= 1e-12)
    c.runtime(10)
    c.finish(capsys)


# 2 -----------------------------------------------------------------------

def test_criterion_2_fleet_sizing(capsys):
    c = Checks(2, "fleet sizing, 60 stations")
    m = symmetric_network()
    econ = Economics(30, FleetCost(per_vehicle=4.0), availability_target=0.2)
    res = optimal_fleet_size(m, econ)
    c.add("M* = 763", res.optimal == (763,), f"got {res.optimal}")
    a = float(res.availability.min())
    c.add("availability 87.2% +- 0.1pp", abs(a - 0.872) <= 1e-3, f"{100 * a:.3f}%")
    one = symmetric_network(chargers=1)
    lam = visit_ratios(one)
    a1 = lam[one.ss[0]] / 10.0 * mva.mva_solve(one, 763, lam).system_throughput
    c.add("v = 1: availability 54.47% +- 0.1pp", abs(a1 - 0.5447) <= 1e-3, f"{100 * a1:.3f}%")
    c.runtime(300)
    c.finish(capsys)


# 3 -----------------------------------------------------------------------

TABLE = {  # V: (profit, revenue, cost, penalty) reference values
    (1, 1, 1): (458.16, 478.25, 8, 12.09),
    (1, 2, 1): (457.53, 479.56, 10, 12.03),
    (2, 1, 1): (533.58, 554.79, 12, 9.21),
    (3, 1, 1): (530.05, 555.23, 16, 9.18),
    (2, 2, 1): (553.46, 575.89, 14, 8.43),
    (3, 2, 1): (549.53, 575.93, 18, 8.40),
    (2, 2, 2): (766.58, 783.21, 16, 0.63),
    (2, 3, 2): (766.98, 785.55, 18, 0.57),
    (3, 2, 2): (769.61, 790.00, 20, 0.39),
    (3, 3, 2): (769.52, 791.85, 22, 0.33),
    (4, 2, 2): (766.15, 790.51, 24, 0.36),
}


def test_criterion_3_charger_table(capsys):
    c = Checks(3, "charger allocation table, 3 stations")
    m = downtown_suburb_network()
    econ = Economics(revenue=30, charger_cost=(4, 2, 2), loss_penalty=1)
    res = allocate_chargers(m, econ, 40)
    seen = {e.objective.chargers: e.objective for e in res.trace}
    names = ("profit", "revenue", "cost", "penalty")
    for col, name in enumerate(names):
        bad = []
        for v, row in TABLE.items():
            o = seen.get(v)
            got = None if o is None else getattr(o, name)
            if got is None or abs(got - row[col]) > 0.02:
                bad.append(f"{v}: {row[col]} vs {'missing' if got is None else f'{got:.2f}'}")
        c.add(f"{name} column within 0.02", not bad, ", ".join(bad[:3]) + (" ..." if len(bad) > 3 else ""))
    c.add("stops at (3,2,2)", res.chargers == (3, 2, 2), f"got {res.chargers}")
    c.add("final profit 769.61 +- 0.02", abs(res.objective.profit - 769.61) <= 0.02,
          f"{res.objective.profit:.2f}")
    bounded = Economics(revenue=30, charger_cost=(4, 2, 2), loss_penalty=1, charger_bounds=(2, 5, 5))
    got = allocate_chargers(m, bounded, 40).chargers
    c.add("bounds (2,5,5) stop at (2,3,3)", got == (2, 3, 3), f"got {got}")
    c.runtime(60)
    c.finish(capsys)


# 4 -----------------------------------------------------------------------

def test_criterion_4_marginals(capsys):
    c = Checks(4, "empty-queue probabilities, 3 stations")
    m = downtown_suburb_network(chargers=(3, 2, 2))
    sol = productform.solve(m, 40)
    p_ss = sol.marginal(m.ss[1])[0]
    p_fs = sol.marginal(m.fs[1])[0]
    c.add("p_SS2(0) = 0.18 +- 0.01", abs(p_ss - 0.18) <= 0.01, f"{p_ss:.5f}")
    c.add("p_FS2(0) = 0.18 +- 0.01", abs(p_fs - 0.18) <= 0.01, f"{p_fs:.5f}")
    c.finish(capsys)


# 5 -----------------------------------------------------------------------

def _random_network(rng):
    n = int(rng.integers(2, 7))
    kinds = rng.choice(["SS", "IS", "FS"], n).tolist()
    w = np.zeros((n, n))
    perm = rng.permutation(n)
    w[perm, np.roll(perm, -1)] = rng.uniform(0.1, 1.0, n)
    extra = rng.random((n, n)) < 0.3
    np.fill_diagonal(extra, False)
    w[extra] += rng.uniform(0.05, 1.0, extra.sum())
    return generic_network(kinds, rng.uniform(0.2, 5.0, n), rng.integers(1, 4, n), w)


def test_criterion_5_oracle_equivalence(capsys):
    c = Checks(5, "oracle equivalence on 25 random networks")
    rng = np.random.default_rng(20240601)
    g_err = p_err = mva_err = 0.0
    for _ in range(25):
        model = _random_network(rng)
        fleet = int(rng.integers(1, 7))
        lam = visit_ratios(model)
        g = productform.convolution_g(model, lam, fleet)
        for k in range(fleet + 1):
            ref = brute_force_g(model, lam, k)
            g_err = max(g_err, abs(math.exp(g.log_g[k]) / ref - 1))
        sol = productform.solve(model, fleet, lam)
        for state, p in ctmc_stationary(model, fleet).items():
            p_err = max(p_err, abs(sol.state_probability(state) - p))
        tp = mva.mva_solve(model, fleet, lam).system_throughput
        mva_err = max(mva_err, abs(tp - sol.system_throughput) / sol.system_throughput)
    c.add("G vs enumeration, rel <= 1e-12", g_err <= 1e-12, f"{g_err:.1e}")
    c.add("stationary law vs CTMC, <= 1e-9", p_err <= 1e-9, f"{p_err:.1e}")
    c.add("MVA vs convolution, <= 1e-9", mva_err <= 1e-9, f"{mva_err:.1e}")
    c.runtime(60)
    c.finish(capsys)


# 6 -----------------------------------------------------------------------

def _concave(x):
    x = np.asarray(x)
    return bool(np.all(x[:-2] + x[2:] <= 2 * x[1:-1] + SLACK))


def _two_charger_cases():
    for rates, cp, fleet, costs, beta in itertools.product(
            [(1.0, 1.0), (1.0, 3.0), (0.5, 3.0)], [Fraction(1, 4), Fraction(1, 2), 1],
            [2, 5, 8, 11, 14], [(0.0, 0.0), (0.1, 0.5), (1.0, 1.0)], [0.0, 1.0]):
        yield two_station(charge_prob=cp, rates=rates), fleet, Economics(
            revenue=6.0, charger_cost=costs, loss_penalty=beta, charger_bounds=(5, 5))


def test_criterion_6_shape_properties(capsys):
    c = Checks(6, "concavity, monotonicity, supermodularity, greedy optimality")
    nets = [downtown_suburb_network(), two_station(), symmetric_network(stations=5),
            two_station(charge_prob=1, rates=(0.5, 3.0))]
    lam_m_ok = f_ok = avail_m_ok = True
    for m in nets:
        lam = visit_ratios(m)
        curve = ThroughputCurve(m, lam)
        tp = np.array([curve(k) for k in range(61)])
        lam_m_ok &= _concave(tp) and bool(np.all(np.diff(tp) >= -SLACK))
        econ = Economics(30, FleetCost(per_vehicle=4.0))
        f_ok &= _concave([profit(m, econ, k) for k in range(61)])
        avail = lam[m.ss][None, :] * tp[:, None]
        avail_m_ok &= bool(np.all(np.diff(avail, axis=0) >= -SLACK))
    c.add("throughput concave in M", lam_m_ok)
    c.add("profit concave in M", f_ok)
    c.add("availability monotone in M", avail_m_ok)

    conc_lam = conc_h = mono = True
    m3 = downtown_suburb_network()
    econ3 = Economics(revenue=30, charger_cost=(4, 2, 2), loss_penalty=1)
    for j in range(3):
        for base in itertools.product(range(1, 4), repeat=3):
            line = []
            for k in range(5):
                v = list(base)
                v[j] += k
                line.append(allocation_objective(m3, econ3, 40, tuple(v)))
            conc_lam &= _concave([o.throughput for o in line])
            conc_h &= _concave([o.profit for o in line])
            av = np.array([o.availability for o in line])
            mono &= bool(np.all(np.diff(av, axis=0) >= -SLACK))
    c.add("throughput concave in each v_j", conc_lam)
    c.add("h concave in each v_j", conc_h)
    c.add("availability at every SS monotone in each v_j", mono)

    super_bad, greedy_bad, total = [], [], 0
    for m, fleet, econ in _two_charger_cases():
        total += 1

        def h(v):
            return allocation_objective(m, econ, fleet, v).profit

        for v1, v2 in itertools.product(range(1, 4), range(2, 5)):
            gap = h((v1 + 1, v2)) + h((v1, v2 - 1)) - h((v1 + 1, v2 - 1)) - h((v1, v2))
            if gap < -SLACK:
                super_bad.append(gap)
        res = allocate_chargers(m, econ, fleet)
        _, best = exhaustive_allocation(h, np.minimum(econ.bounds(m), fleet).astype(int))
        if res.objective.profit < best - SLACK:
            greedy_bad.append(best - res.objective.profit)
    c.add("h supermodular on 2-charger grids", not super_bad,
          f"{len(super_bad)} violations, worst {min(super_bad, default=0):.2e}")
    c.add("greedy = exhaustive for 2 chargers", not greedy_bad,
          f"{len(greedy_bad)} of {total} cases short, worst {max(greedy_bad, default=0):.3f}")
    c.runtime(300)
    c.finish(capsys)


# 7 -----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_insensitivity(capsys):
    c = Checks(7, "insensitivity by simulation")
    horizon, reps = 2e5, 10
    m = two_station()
    exact = productform.solve(m, 3).system_throughput

    def run(model, **laws):
        return simulate(SimConfig(model, 3, horizon, base_seed=77, replications=reps, **laws))

    expo = run(m)
    c.add("exponential matches product form", expo.throughput.contains(exact, 3),
          f"{float(expo.throughput.mean):.4f} vs {exact:.4f}")
    for family in ("gamma", "inverse-gaussian"):
        for scv in (0.25, 4.0):
            r = run(m, travel=TimeLaw(family, scv))
            diff = float(r.throughput.mean - expo.throughput.mean)
            hw = float(np.hypot(r.throughput.half_width, expo.throughput.half_width))
            c.add(f"{family} travel c2={scv:g} within 3 CI half-widths",
                  r.throughput.contains(exact, 3) and abs(diff) <= 3 * hw,
                  f"{float(r.throughput.mean):.4f} +- {float(r.throughput.half_width):.4f}")
    wide = two_station(chargers=(3, 3))
    exact_w = productform.solve(wide, 3).system_throughput
    for law in (TimeLaw("deterministic"), TimeLaw("gamma", 4.0)):
        r = run(wide, charging=law)
        c.add(f"{law.family} charging with v >= M", r.throughput.contains(exact_w, 3),
              f"{float(r.throughput.mean):.4f} vs {exact_w:.4f}")
    c.runtime(600)
    c.finish(capsys)


# 8 -----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_charger_selection(capsys):
    c = Checks(8, "fast vs slow chargers")
    bad = []
    for g in [Fraction(k, 10) for k in range(1, 10)]:
        for p0 in [Fraction(k, 20) for k in range(1, 21)]:
            r = zero_inflated_delays(g, Fraction(1, 2), p0)
            lhs = (r.d1 > r.d2) - (r.d1 < r.d2)
            rhs = (r.scv > r.threshold) - (r.scv < r.threshold)
            if lhs != rhs:
                bad.append((g, p0))
    c.add("sign identity on the (gamma, p0) grid", not bad, f"{len(bad)} mismatches")

    grid = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]
    res = two_queue_charger_experiment(grid, servers=(1, 2, 5), horizon=1e5, replications=10,
                                       base_seed=2024)
    x2, x5 = res.crossings[2], res.crossings[5]
    c.add("1 vs 2 servers cross at c2 = 1.9 +- 0.5", x2 is not None and abs(x2 - 1.9) <= 0.5,
          f"{x2}")
    c.add("1 vs 5 servers cross at c2 = 4 +- 1", x5 is not None and abs(x5 - 4.0) <= 1.0, f"{x5}")
    flat = two_queue_charger_experiment([0.5, 1.0, 4.0, 8.0], servers=(10,), horizon=1e5,
                                        replications=10, base_seed=2024)
    exact = productform.solve(two_queue_network(10), 10).system_throughput
    inside = np.abs(flat.throughput[10] - exact) <= 3 * flat.half_width[10]
    c.add("10 servers, 10 vehicles: flat in c2", bool(np.all(inside)),
          f"{np.round(flat.throughput[10], 4).tolist()} vs {exact:.4f}")
    c.runtime(900)
    c.finish(capsys)


# 9 -----------------------------------------------------------------------

def test_criterion_9_determinism(capsys, tmp_path):
    c = Checks(9, "byte-identical reruns")
    two, three = str(CONFIGS / "two_station.yaml"), str(CONFIGS / "three_station.yaml")
    commands = [
        ["solve", two, "--method", "both", "--marginals"],
        ["fleet-size", two, "--trace", "{tmp}/trace.csv"],
        ["allocate", three, "--trace", "{tmp}/trace.csv"],
        ["compare-chargers", two, "--simulate", "--seed", "5", "--customers", "20000"],
        ["simulate", two, "--seed", "5", "--horizon", "5000", "--raw", "{tmp}/raw.csv"],
    ]
    for cmd in commands:
        outputs = []
        for k in range(2):
            d = tmp_path / f"{cmd[0]}{k}"
            d.mkdir()
            for fmt in ("table", "csv", "json"):
                argv = [a.replace("{tmp}", str(d)) for a in cmd] + ["--output", fmt]
                p = subprocess.run([sys.executable, "-m", "evshare.cli", *argv],
                                   capture_output=True)
                files = b"".join(f.read_bytes() for f in sorted(d.glob("*.csv")))
                outputs.append((p.returncode, p.stdout, p.stderr, files))
        first, second = outputs[:3], outputs[3:]
        c.add(f"{cmd[0]} reruns identical", first == second and all(o[0] == 0 for o in first))
    code = main(["simulate", two, "--seed", "5", "--horizon", "2000", "--workers", "2",
                 "--output", "csv"])
    a = capsys.readouterr().out
    main(["simulate", two, "--seed", "5", "--horizon", "2000", "--output", "csv"])
    b = capsys.readouterr().out
    c.add("worker count does not change results", code == 0 and a == b)
    c.finish(capsys)
