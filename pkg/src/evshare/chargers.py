"""Greedy (marginal) charger allocation at a fixed fleet size."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mva, productform
from .economics import Economics
from .errors import BoundViolation
from .network import NetworkModel, visit_ratios

TIE_REL = 1e-9


@dataclass(frozen=True)
class Objective:
    """h(V) and its revenue / cost / penalty split."""

    chargers: tuple[int, ...]
    profit: float
    revenue: float
    cost: float
    penalty: float
    throughput: float
    availability: np.ndarray = field(repr=False, compare=False)


def _throughput(model: NetworkModel, lam, fleet_size: int, method: str) -> float:
    if fleet_size == 0:
        return 0.0
    if method == "mva":
        return mva.mva_solve(model, fleet_size, lam).system_throughput
    if method == "convolution":
        return productform.solve(model, fleet_size, lam).system_throughput
    raise ValueError(f"unknown throughput method {method!r}")


def _check_identical_charging(model: NetworkModel) -> str | None:
    rates = {model.nodes[i].base_rate for i in model.fs}
    if len(rates) > 1:
        return ("charging times differ across charging points; concavity and the "
                "greedy optimality guarantee assume identical chargers")
    return None


def allocation_objective(model: NetworkModel, econ: Economics, fleet_size: int, chargers,
                         lam: np.ndarray | None = None, method: str = "mva") -> Objective:
    """h(V) = Lambda(V) * Zbar - sum c_j v_j - sum beta_k alpha_k."""
    chargers = tuple(int(v) for v in chargers)
    bounds = econ.bounds(model)
    if len(chargers) != len(bounds):
        raise BoundViolation(f"expected {len(bounds)} charger counts, got {len(chargers)}")
    if any(v < 1 or v > b for v, b in zip(chargers, bounds)):
        raise BoundViolation(f"charger vector {chargers} outside [1, {bounds.tolist()}]")
    lam = visit_ratios(model) if lam is None else np.asarray(lam, float)
    lam = lam / lam.sum()
    net = model.with_chargers(chargers)
    tp = _throughput(net, lam, fleet_size, method)
    ss = model.ss
    alpha = np.array([model.nodes[i].base_rate for i in ss])
    beta = econ.penalties(model)
    avail = lam[ss] / alpha * tp
    revenue = tp * econ.trip_value(model, lam)
    cost = float(np.dot(econ.charger_costs(model), chargers))
    penalty = float(np.dot(beta * alpha, 1.0 - avail))
    zbar = econ.trip_value(model, lam) + float(np.dot(lam[ss], beta))
    h = tp * zbar - cost - float(np.dot(beta, alpha))
    return Objective(chargers, h, revenue, cost, penalty, tp, avail)


@dataclass(frozen=True)
class TraceEntry:
    step: int
    objective: Objective
    role: str  # "current" or "candidate"
    accepted: bool = False


@dataclass
class AllocationResult:
    chargers: tuple[int, ...]
    objective: Objective
    trace: list[TraceEntry]
    label: str
    warnings: list[str] = field(default_factory=list)

    def table_rows(self):
        """Step / V / Profit / Revenue / Cost / Penalty rows.

        Each step's current vector is numbered; rejected candidates follow
        it unnumbered (accepted ones reappear as the next step).  The final
        step carries a star.
        """
        last = max(e.step for e in self.trace)
        rows = []
        for e in self.trace:
            if e.role == "candidate" and e.accepted:
                continue
            o = e.objective
            step = ""
            if e.role == "current":
                step = f"{e.step}*" if e.step == last else str(e.step)
            rows.append((step, o.chargers, o.profit, o.revenue, o.cost, o.penalty))
        return rows

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "role", "accepted", "V", "profit", "revenue", "cost", "penalty"])
            for e in self.trace:
                o = e.objective
                w.writerow([e.step, e.role, int(e.accepted), " ".join(map(str, o.chargers)),
                            f"{o.profit:.17g}", f"{o.revenue:.17g}", f"{o.cost:.17g}",
                            f"{o.penalty:.17g}"])


def allocate_chargers(model: NetworkModel, econ: Economics, fleet_size: int,
                      lam: np.ndarray | None = None, method: str = "mva") -> AllocationResult:
    """Marginal allocation from V = (1, ..., 1).

    Each round adds one charger where h rises most (ties go to the lowest
    index) and stops once no addition raises h.  An unbounded point is
    capped at ``fleet_size`` chargers, past which h cannot rise.
    """
    if fleet_size < 1:
        raise ValueError("fleet size must be >= 1")
    lam = visit_ratios(model) if lam is None else np.asarray(lam, float)
    lam = lam / lam.sum()
    notes = []
    msg = _check_identical_charging(model)
    if msg:
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    bounds = econ.bounds(model)
    caps = np.minimum(bounds, max(fleet_size, 1)).astype(int)
    f = len(caps)
    memo: dict[tuple[int, ...], Objective] = {}

    def h(v):
        if v not in memo:
            memo[v] = allocation_objective(model, econ, fleet_size, v, lam, method)
        return memo[v]

    current = tuple([1] * f)
    trace: list[TraceEntry] = []
    step = 1
    while True:
        here = h(current)
        trace.append(TraceEntry(step, here, "current"))
        open_ = [j for j in range(f) if current[j] < caps[j]]
        if not open_:
            break
        best_j, best_gain = None, -np.inf
        cands = []
        for j in open_:
            v = list(current)
            v[j] += 1
            o = h(tuple(v))
            gain = o.profit - here.profit
            cands.append((j, o))
            if gain > best_gain + TIE_REL * max(1.0, abs(here.profit)):
                best_j, best_gain = j, gain
        improve = best_gain > TIE_REL * max(1.0, abs(here.profit))
        for j, o in cands:
            trace.append(TraceEntry(step, o, "candidate", accepted=improve and j == best_j))
        if not improve:
            break
        v = list(current)
        v[best_j] += 1
        current = tuple(v)
        step += 1
    label = "optimal" if f <= 2 else "heuristic (conjectured optimal)"
    return AllocationResult(current, h(current), trace, label, notes)
