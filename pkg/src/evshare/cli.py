"""Command-line entry point: ``evshare <command> CONFIG [options]``.

Exit status: 0 success, 2 configuration error, 3 infeasible optimisation,
4 numerical failure.  Set ``EVSHARE_LOG`` (e.g. ``INFO``) for log output
on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from . import mva, productform, selection, sim
from .chargers import allocate_chargers
from .distributions import zero_inflated
from .errors import ConfigError, EvShareError, InfeasibleAtCap
from .fleet import optimal_fleet_size
from .network import visit_ratios

log = logging.getLogger("evshare")


@dataclass
class Section:
    title: str
    headers: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class Report:
    scalars: dict = field(default_factory=dict)
    sections: list[Section] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _cell_table(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "yes" if x else "no"
    if isinstance(x, (float, np.floating)):
        return f"{x:.2f}"
    if isinstance(x, (tuple, list)):
        return "(" + ",".join(_cell_table(v) for v in x) + ")"
    if x is None:
        return "-"
    return str(x)


def _cell_csv(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (tuple, list)):
        return " ".join(_cell_csv(v) for v in x)
    if x is None:
        return ""
    return str(x)


def _plain(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, (tuple, list)):
        return [_plain(v) for v in x]
    return x


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        doc = {k: _plain(v) for k, v in report.scalars.items()}
        for s in report.sections:
            doc[s.title] = [dict(zip(s.headers, map(_plain, r))) for r in s.rows]
        if report.notes:
            doc["notes"] = report.notes
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if report.scalars:
            w.writerow(["key", "value"])
            for k, v in report.scalars.items():
                w.writerow([k, _cell_csv(v)])
        for s in report.sections:
            if buf.tell():
                buf.write("\n")
            buf.write(f"# {s.title}\n")
            w.writerow(s.headers)
            for r in s.rows:
                w.writerow([_cell_csv(v) for v in r])
        return buf.getvalue()
    out = []
    if report.scalars:
        width = max(len(k) for k in report.scalars)
        out += [f"{k:<{width}}  {_cell_table(v)}" for k, v in report.scalars.items()]
    for s in report.sections:
        cells = [s.headers] + [[_cell_table(v) for v in r] for r in s.rows]
        widths = [max(len(row[j]) for row in cells) for j in range(len(s.headers))]
        out += ["", s.title]
        for row in cells:
            out.append("  ".join(c.rjust(widths[j]) if j else c.ljust(widths[j])
                                 for j, c in enumerate(row)).rstrip())
    out += [f"note: {n}" for n in report.notes]
    return "\n".join(out) + "\n"


def _fleet_size(args, cfg) -> int:
    m = args.fleet_size if args.fleet_size is not None else cfg.solver.fleet_size
    if m is None:
        raise ConfigError("fleet size not given (use --fleet-size or solver.fleet_size)")
    if m < 0:
        raise ConfigError("fleet size must be >= 0")
    return m


def _station(model, i) -> str:
    return model.station_ids[model.nodes[i].station] if model.station_ids else str(i)


# --- commands ---------------------------------------------------------------

def cmd_solve(args) -> Report:
    cfg = cfgmod.load(args.config)
    model = cfg.model
    m = _fleet_size(args, cfg)
    method = args.method or cfg.solver.method
    scv = cfg.solver.arrival_scv
    if scv is not None and method != "mva":
        raise ConfigError("arrival_scv (general arrivals) needs method mva")
    lam = visit_ratios(model)
    n = model.size
    rep = Report({"fleet_size": m, "method": method})
    tp = {"mva": 0.0, "convolution": 0.0}
    queue = np.zeros(n)
    marg = None
    if m > 0:
        if method in ("mva", "both"):
            res = (mva.mva_solve(model, m, lam) if scv is None
                   else mva.mva_general_arrivals(model, m, scv, lam))
            tp["mva"] = res.system_throughput
            queue = res.state.queue
            if res.meta["approximation"]:
                rep.notes.append("general inter-arrival times: MVA approximation")
        if method in ("convolution", "both") or args.marginals:
            pf = productform.solve(model, m, lam)
            tp["convolution"] = pf.system_throughput
            if method != "mva":
                queue = pf.mean_queue_lengths()
            if args.marginals:
                marg = pf.marginals()
    main = tp["mva"] if method == "mva" else tp["convolution"]
    if method == "both":
        rep.scalars["throughput_mva"] = tp["mva"]
        rep.scalars["throughput_convolution"] = tp["convolution"]
    else:
        rep.scalars["throughput"] = main
    ss = model.ss
    alpha = np.array([model.nodes[i].base_rate for i in ss])
    avail = lam[ss] / alpha * main
    st = Section("stations", ["station", "availability", "loss_probability"])
    for k, i in enumerate(ss):
        st.rows.append([_station(model, i), float(avail[k]), float(1.0 - avail[k]) if m else 0.0])
    nodes = Section("nodes", ["node", "label", "kind", "visit_ratio", "throughput", "mean_queue"])
    for i, nd in enumerate(model.nodes):
        nodes.rows.append([i, nd.label, nd.kind.value, float(lam[i]), float(lam[i] * main),
                           float(queue[i])])
    rep.sections += [st, nodes]
    if marg is not None:
        ms = Section("marginals", ["node", "n", "probability"])
        for i, p in enumerate(marg):
            for k, v in enumerate(p):
                if v >= 1e-15:
                    ms.rows.append([i, k, float(v)])
        rep.sections.append(ms)
    return rep


def cmd_fleet_size(args) -> Report:
    cfg = cfgmod.load(args.config)
    model = cfg.model
    method = args.method or cfg.solver.method
    if method == "both":
        method = "mva"
    res = optimal_fleet_size(model, cfg.economics, max_fleet=args.max_fleet or cfg.solver.max_fleet,
                             method=method)
    if args.trace:
        res.write_trace(args.trace)
    rep = Report({"optimal_fleet_size": list(res.optimal), "profit": res.profit,
                  "feasible": res.feasible, "on_availability_boundary": res.boundary,
                  "min_availability": float(res.availability.min())})
    st = Section("stations", ["station", "availability"])
    for k, i in enumerate(model.ss):
        st.rows.append([_station(model, i), float(res.availability[k])])
    rep.sections.append(st)
    return rep


def cmd_allocate(args) -> Report:
    cfg = cfgmod.load(args.config)
    m = _fleet_size(args, cfg)
    method = args.method or cfg.solver.method
    if method == "both":
        method = "mva"
    res = allocate_chargers(cfg.model, cfg.economics, m, method=method)
    if args.trace:
        res.write_trace(args.trace)
    o = res.objective
    rep = Report({"fleet_size": m, "chargers": list(res.chargers), "profit": o.profit,
                  "result": res.label})
    table = Section("allocation", ["Step", "V", "Profit", "Revenue", "Cost", "Penalty"])
    table.rows = [list(r) for r in res.table_rows()]
    rep.sections.append(table)
    rep.notes += res.warnings
    return rep


def cmd_compare_chargers(args) -> Report:
    sel = cfgmod.load(args.config).selection if args.config else cfgmod.SelectionSettings()
    gamma = args.utilisation if args.utilisation is not None else sel.utilisation
    t0 = args.t0 if args.t0 is not None else sel.t0
    grid = sel.scv if args.c2 is None else _float_list(args.c2)
    d1, d2_uncorrected = selection.exponential_delays(gamma, t0)
    rate = gamma / t0
    rep = Report({
        "utilisation": gamma, "t0": t0, "threshold_scv": 1 + 2 / gamma,
        "exponential_d1": d1,
        "exponential_d2_uncorrected": d2_uncorrected,
        "exponential_d2_mm2": selection.mmk_sojourn(rate, 2 * t0, 2),
    })
    headers = ["c2", "p0", "D1", "D2", "threshold", "two_slow_faster"]
    if args.simulate:
        if args.seed is None:
            raise ConfigError("--simulate needs --seed")
        headers += ["D1_sim", "D1_hw", "D2_sim", "D2_hw"]
    table = Section("sweep", headers)
    for row in selection.charger_sweep(gamma, t0, grid):
        cells = [row.scv, row.p0, row.d1, row.d2, row.threshold, row.slow_pair_faster]
        if args.simulate:
            for k in (1, 2):
                law = zero_inflated(k * t0, row.p0)
                q = sim.simulate_open_queue(rate, law, k, args.customers, args.seed,
                                            args.replications)
                cells += [float(q.sojourn.mean), float(q.sojourn.half_width)]
        table.rows.append(cells)
    rep.sections.append(table)
    return rep


def cmd_simulate(args) -> Report:
    cfg = cfgmod.load(args.config)
    model = cfg.model
    m = _fleet_size(args, cfg)
    s = cfg.sim
    horizon = args.horizon if args.horizon is not None else s.horizon
    reps = args.replications if args.replications is not None else s.replications
    travel = cfgmod.travel_laws(cfg)
    sc = sim.SimConfig(model, m, horizon, args.seed, reps, s.warmup, s.batches,
                       travel=travel, charging=s.charging, arrivals=s.arrivals)
    res = sim.simulate(sc, workers=args.workers or s.workers)
    if args.raw:
        res.write_raw(args.raw)
    rep = Report({"fleet_size": m, "horizon": horizon, "warmup": res.warmup,
                  "replications": reps, "seeds": list(res.seeds),
                  "throughput": float(res.throughput.mean),
                  "throughput_hw": float(res.throughput.half_width)})
    if m > 0:
        rep.scalars["throughput_product_form"] = productform.solve(model, m).system_throughput
    st = Section("stations", ["station", "availability", "availability_hw",
                              "loss_fraction", "loss_fraction_hw"])
    for k, i in enumerate(model.ss):
        st.rows.append([_station(model, i), res.availability.mean[k], res.availability.half_width[k],
                        res.loss_fraction.mean[k], res.loss_fraction.half_width[k]])
    nodes = Section("nodes", ["node", "label", "throughput", "throughput_hw",
                              "mean_queue", "mean_queue_hw"])
    for i, nd in enumerate(model.nodes):
        nodes.rows.append([i, nd.label, res.node_throughput.mean[i], res.node_throughput.half_width[i],
                           res.queue_length.mean[i], res.queue_length.half_width[i]])
    fs = Section("charging", ["station", "mean_delay", "mean_delay_hw"])
    for k, i in enumerate(model.fs):
        fs.rows.append([_station(model, i), res.fs_delay.mean[k], res.fs_delay.half_width[k]])
    rep.sections += [st, nodes, fs]
    return rep


def _float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(cfgmod.number(v)) for v in text.split(",")]
    except ConfigError:
        raise ConfigError(f"--c2: expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evshare", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="YAML configuration file")
        sp.add_argument("--output", choices=("table", "csv", "json"), default="table")

    sp = sub.add_parser("solve", help="stationary throughput, availability and queue lengths")
    common(sp)
    sp.add_argument("--fleet-size", type=int)
    sp.add_argument("--method", choices=("mva", "convolution", "both"))
    sp.add_argument("--marginals", action="store_true", help="also list marginal distributions")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("fleet-size", help="profit-maximising fleet size")
    common(sp)
    sp.add_argument("--max-fleet", type=int)
    sp.add_argument("--method", choices=("mva", "convolution"))
    sp.add_argument("--trace", help="write the search trace as CSV")
    sp.set_defaults(func=cmd_fleet_size)

    sp = sub.add_parser("allocate", help="greedy charger allocation")
    common(sp)
    sp.add_argument("--fleet-size", type=int)
    sp.add_argument("--method", choices=("mva", "convolution"))
    sp.add_argument("--trace", help="write every evaluated vector as CSV")
    sp.set_defaults(func=cmd_allocate)

    sp = sub.add_parser("compare-chargers", help="one fast charger vs two slow ones")
    sp.add_argument("config", nargs="?", help="optional YAML file (selection section)")
    sp.add_argument("--output", choices=("table", "csv", "json"), default="table")
    sp.add_argument("--utilisation", "--gamma", dest="utilisation", type=float)
    sp.add_argument("--t0", type=float)
    sp.add_argument("--c2", "--c2-sweep", dest="c2", help="comma-separated c^2 values (each >= 1)")
    sp.add_argument("--simulate", action="store_true", help="add simulated delays")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--customers", type=int, default=200_000)
    sp.add_argument("--replications", type=int, default=5)
    sp.set_defaults(func=cmd_compare_chargers)

    sp = sub.add_parser("simulate", help="discrete-event simulation")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--fleet-size", type=int)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--raw", help="write per-batch raw metrics as CSV")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    level = os.environ.get("EVSHARE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    log.info("command %s", args.command)
    try:
        report = args.func(args)
    except InfeasibleAtCap as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return exc.exit_code
    except EvShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    sys.stdout.write(render(report, args.output))
    return 0


if __name__ == "__main__":
    sys.exit(main())
