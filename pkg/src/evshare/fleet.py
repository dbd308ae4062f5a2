"""Profit-maximising fleet size under per-station availability floors."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import mva, productform
from .economics import Economics
from .errors import InfeasibleAtCap
from .network import NetworkModel, NodeKind, visit_ratios

log = logging.getLogger(__name__)

DEFAULT_MAX_FLEET = 100_000
TIE_REL = 1e-9
PLATEAU_WINDOW = 50
PLATEAU_REL = 1e-10


class ThroughputCurve:
    """Lazily extended Lambda(m), m = 0, 1, 2, ...

    ``mva`` advances the recursion one population at a time; ``convolution``
    recomputes G on a doubling horizon (one G vector yields every Lambda(m)
    up to its length).
    """

    def __init__(self, model: NetworkModel, lam: np.ndarray, method: str = "mva"):
        if method not in ("mva", "convolution"):
            raise ValueError(f"unknown throughput method {method!r}")
        self.model, self.lam, self.method = model, lam, method
        self.values = [0.0]
        self._iter = mva.iterate(model, lam) if method == "mva" else None

    def __call__(self, m: int) -> float:
        while len(self.values) <= m:
            if self.method == "mva":
                self.values.append(next(self._iter).throughput)
            else:
                horizon = max(64, 2 * len(self.values), m + 1)
                g = productform.convolution_g(self.model, self.lam, horizon)
                self.values = [g.ratio(k) for k in range(horizon + 1)]
        return self.values[m]


def saturation_throughput(model: NetworkModel, lam: np.ndarray) -> float:
    """lim Lambda(M) as M grows: the tightest capacity / visit-ratio ratio."""
    caps = []
    for i, nd in enumerate(model.nodes):
        if nd.kind is NodeKind.IS or lam[i] <= 0:
            continue
        top = nd.base_rate * (1 if nd.kind is NodeKind.SS else nd.servers)
        caps.append(top / lam[i])
    return min(caps) if caps else np.inf


def profit(model: NetworkModel, econ: Economics, fleet_size: int,
           lam: np.ndarray | None = None, method: str = "mva") -> float:
    """f(M) = Lambda(M) * sum_IS z_i lam_i - g(M)."""
    lam = _normalised(model, lam)
    tp = ThroughputCurve(model, lam, method)(fleet_size) if fleet_size > 0 else 0.0
    return tp * econ.trip_value(model, lam) - econ.fleet_cost(fleet_size)


@dataclass
class TraceRow:
    fleet_size: int
    profit: float
    revenue: float
    cost: float
    min_availability: float


@dataclass
class FleetSizingResult:
    optimal: tuple[int, ...]
    profit: float
    availability: np.ndarray
    feasible: bool
    boundary: bool  # optimum sits on the availability constraint
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def fleet_size(self) -> int:
        return self.optimal[-1]

    def write_trace(self, path) -> None:
        write_trace_csv(self.trace, path)


def write_trace_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "profit", "revenue", "cost", "min_availability"])
        for r in rows:
            w.writerow([r.fleet_size, f"{r.profit:.17g}", f"{r.revenue:.17g}",
                        f"{r.cost:.17g}", f"{r.min_availability:.17g}"])


def _normalised(model, lam):
    lam = visit_ratios(model) if lam is None else np.asarray(lam, float)
    return lam / lam.sum()


def optimal_fleet_size(model: NetworkModel, econ: Economics, lam: np.ndarray | None = None,
                       max_fleet: int = DEFAULT_MAX_FLEET, method: str = "mva") -> FleetSizingResult:
    """Scan M upward and stop at the first constrained maximiser.

    Relies on f being concave and availability nondecreasing in M.
    Returns two sizes when f is flat between them.  If f already decreases
    where the constraints first hold, that first feasible size is returned.
    """
    if max_fleet < 1:
        raise ValueError("max_fleet must be >= 1")
    lam = _normalised(model, lam)
    curve = ThroughputCurve(model, lam, method)
    trip = econ.trip_value(model, lam)
    ss = model.ss
    gamma = lam[ss] / np.array([model.nodes[i].base_rate for i in ss])
    floor = 1.0 - econ.epsilon(model)
    cost = econ.fleet_cost

    limit = gamma * saturation_throughput(model, lam)
    if np.any(limit < floor - 1e-12):
        worst = int(np.argmin(limit - floor))
        raise InfeasibleAtCap(
            f"availability at {model.nodes[ss[worst]].label} can never exceed "
            f"{limit[worst]:.4f} (floor {floor[worst]:.4f})",
            max_availability=limit,
        )

    def f(m):
        return curve(m) * trip - cost(m)

    def avail(m):
        return gamma * curve(m)

    def feasible(m):
        return bool(np.all(avail(m) >= floor - 1e-12))

    def is_tie(d, ref):
        return abs(d) <= TIE_REL * max(1.0, abs(ref))

    trace: list[TraceRow] = []

    def record(m):
        if trace and trace[-1].fleet_size >= m:
            return
        tp = curve(m)
        a = avail(m)
        trace.append(TraceRow(m, f(m), tp * trip, cost(m), float(a.min()) if a.size else 1.0))

    def result(opt, boundary):
        for m in range(trace[-1].fleet_size + 1 if trace else 1, opt[-1] + 2):
            record(m)
        return FleetSizingResult(tuple(opt), f(opt[-1]), avail(opt[-1]), True, boundary, trace)

    seen_feasible = False
    history: list[float] = []
    for m in range(1, max_fleet + 1):
        record(m)
        if not feasible(m):
            history.append(float(avail(m).min()))
            if len(history) > PLATEAU_WINDOW:
                old, new = history[-PLATEAU_WINDOW - 1], history[-1]
                if new - old <= PLATEAU_REL * max(abs(new), 1e-300):
                    raise InfeasibleAtCap(
                        f"availability plateaued at {new:.6g} below the floor by M={m}",
                        max_availability=avail(m))
            continue
        first = not seen_feasible
        seen_feasible = True
        d = f(m) - f(m - 1)
        if is_tie(d, f(m)):
            if m > 1 and feasible(m - 1):
                return result((m - 1, m), False)
            return result((m,), first)
        if first and d < 0:
            log.info("profit already decreasing where constraints first hold (M=%d)", m)
            return result((m,), True)
        d_next = f(m + 1) - f(m)
        if d > 0 and d_next < 0 and not is_tie(d_next, f(m + 1)):
            return result((m,), False)
    raise InfeasibleAtCap(
        f"no optimum found up to M={max_fleet}",
        max_availability=avail(max_fleet),
    )
