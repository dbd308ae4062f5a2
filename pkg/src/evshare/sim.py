"""Discrete-event simulation of the closed vehicle network.

Departure points (SS) see a passenger stream: an arriving passenger takes
a vehicle if one is parked there and is lost otherwise.  Roads (IS) hold
each vehicle for an independent travel time.  Charging points (FS) serve
vehicles FCFS on ``v`` parallel chargers.

Output statistics use batch means: after the warm-up the remaining
horizon is cut into equal batches, and batch values from all
replications are pooled into one t-interval.
"""
from __future__ import annotations

import csv
import heapq
import math
from bisect import bisect_right
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse, stats

from .distributions import Distribution, Stream, TimeLaw, Uniforms, node_generators
from .errors import InvalidConfig
from .network import NetworkModel, Node, NodeKind

SS, IS, FS = 0, 1, 2
_KIND = {NodeKind.SS: SS, NodeKind.IS: IS, NodeKind.FS: FS}
# heap priority at equal times: service completions first, then passenger arrivals
_COMPLETION, _ARRIVAL = 0, 1
CONFIDENCE = 0.95


LawSpec = TimeLaw | Mapping[int, TimeLaw] | None


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``travel``, ``charging`` and ``arrivals`` give the time law for IS, FS
    and SS nodes: one :class:`TimeLaw` for every node of that kind, or a
    mapping node index -> law (missing nodes stay exponential).  Means
    always come from the node rates.  ``warmup`` defaults to 10% of the
    horizon.
    """

    model: NetworkModel
    fleet_size: int
    horizon: float
    base_seed: int
    replications: int = 1
    warmup: float | None = None
    batches: int = 20
    travel: LawSpec = None
    charging: LawSpec = None
    arrivals: LawSpec = None
    check_conservation: bool = False

    def __post_init__(self):
        if self.fleet_size < 0 or int(self.fleet_size) != self.fleet_size:
            raise InvalidConfig("fleet size must be a nonnegative integer")
        if self.replications < 1:
            raise InvalidConfig("replications must be >= 1")
        if self.batches < 2:
            raise InvalidConfig("need at least 2 batches")
        if not self.horizon > self.effective_warmup >= 0:
            raise InvalidConfig("need horizon > warmup >= 0")

    @property
    def effective_warmup(self) -> float:
        return 0.1 * self.horizon if self.warmup is None else float(self.warmup)

    def law(self, i: int) -> Distribution:
        node = self.model.nodes[i]
        spec = {NodeKind.IS: self.travel, NodeKind.FS: self.charging,
                NodeKind.SS: self.arrivals}[node.kind]
        if isinstance(spec, Mapping):
            spec = spec.get(i)
        spec = spec or TimeLaw()
        return spec.at_mean(node.mean_service)


@dataclass(frozen=True)
class Estimate:
    """Pooled batch-means point estimate and 95% CI half-width."""

    mean: np.ndarray
    half_width: np.ndarray

    @classmethod
    def pool(cls, samples: np.ndarray) -> "Estimate":
        """``samples`` has shape (replications, batches, ...)."""
        flat = samples.reshape(-1, *samples.shape[2:])
        n = flat.shape[0]
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(flat, axis=0)
            sd = np.nanstd(flat, axis=0, ddof=1)
        q = stats.t.ppf(0.5 + CONFIDENCE / 2, n - 1)
        return cls(mean, q * sd / math.sqrt(n))

    def contains(self, value, widths: float = 1.0) -> np.ndarray:
        return np.abs(np.asarray(value) - self.mean) <= widths * self.half_width


@dataclass
class SimulationReport:
    throughput: Estimate  # system throughput (sum over nodes, visit ratios sum to 1)
    node_throughput: Estimate
    availability: Estimate  # SS order
    loss_fraction: Estimate  # SS order
    queue_length: Estimate  # all nodes
    fs_delay: Estimate  # FS order, sojourn at the charging point
    seeds: tuple[int, ...]
    horizon: float
    warmup: float
    batches: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def write_raw(self, path) -> None:
        """Per-replication, per-batch raw metrics as CSV (one row per batch)."""
        keys = list(self.batches)
        reps, nb = self.batches[keys[0]].shape[:2]
        header = ["replication", "seed", "batch"]
        for k in keys:
            width = self.batches[k].shape[2] if self.batches[k].ndim == 3 else 0
            header += [k] if width == 0 else [f"{k}[{j}]" for j in range(width)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in range(reps):
                for b in range(nb):
                    row = [r, self.seeds[r], b]
                    for k in keys:
                        row += [f"{x:.17g}" for x in np.atleast_1d(self.batches[k][r, b])]
                    w.writerow(row)


@dataclass(frozen=True)
class _Plan:
    """Picklable, flattened view of a configuration."""

    kinds: tuple[int, ...]
    servers: tuple[int, ...]
    laws: tuple[Distribution, ...]
    dests: tuple[tuple[int, ...], ...]
    cum: tuple[tuple[float, ...], ...]
    fleet_size: int
    start: float
    stop: float
    batches: int
    base_seed: int
    check: bool


def _plan(cfg: SimConfig) -> _Plan:
    model = cfg.model
    kinds, servers, dests, cum = [], [], [], []
    for i, node in enumerate(model.nodes):
        kinds.append(_KIND[node.kind])
        servers.append(int(node.servers) if node.kind is NodeKind.FS else 0)
        d, p = model.successors(i)
        c = np.cumsum(p)
        c[-1] = 1.0
        dests.append(tuple(int(x) for x in d))
        cum.append(tuple(float(x) for x in c))
    laws = tuple(cfg.law(i) for i in range(model.size))
    return _Plan(tuple(kinds), tuple(servers), laws, tuple(dests), tuple(cum),
                 int(cfg.fleet_size), cfg.effective_warmup, float(cfg.horizon),
                 cfg.batches, int(cfg.base_seed), cfg.check_conservation)


def _replicate(plan: _Plan, rep: int) -> dict[str, np.ndarray]:
    kinds, servers, dests, cum = plan.kinds, plan.servers, plan.dests, plan.cum
    n_nodes = len(kinds)
    gens = node_generators(plan.base_seed, rep, 2 * n_nodes)
    draw = [Stream(plan.laws[i], gens[2 * i]) for i in range(n_nodes)]
    pick = [Uniforms(gens[2 * i + 1]) for i in range(n_nodes)]

    n = [0] * n_nodes
    last = [0.0] * n_nodes
    busy_fs = [0] * n_nodes
    waiting = [deque() for _ in range(n_nodes)]
    heap: list = []
    seq = 0

    nb = plan.batches
    width = (plan.stop - plan.start) / nb
    bounds = [plan.start + k * width for k in range(nb)] + [plan.stop]
    out = {k: np.zeros((nb, n_nodes)) for k in
           ("area", "occupied", "done", "arrivals", "lost", "delay_sum", "delay_count")}
    area = [0.0] * n_nodes
    occ = [0.0] * n_nodes
    done = [0] * n_nodes
    arr = [0] * n_nodes
    lost = [0] * n_nodes
    dsum = [0.0] * n_nodes
    dcnt = [0] * n_nodes
    batch = -1  # -1 while warming up
    next_bound = bounds[0]

    def touch(i, t):
        dt = t - last[i]
        if dt:
            area[i] += n[i] * dt
            if n[i]:
                occ[i] += dt
            last[i] = t

    def arrive(j, t):
        nonlocal seq
        touch(j, t)
        n[j] += 1
        k = kinds[j]
        if k == IS:
            seq += 1
            heapq.heappush(heap, (t + draw[j](), _COMPLETION, j, seq, t))
        elif k == FS:
            if busy_fs[j] < servers[j]:
                busy_fs[j] += 1
                seq += 1
                heapq.heappush(heap, (t + draw[j](), _COMPLETION, j, seq, t))
            else:
                waiting[j].append(t)

    def depart(i, t):
        touch(i, t)
        n[i] -= 1
        done[i] += 1
        d = dests[i]
        if len(d) == 1:
            return d[0]
        return d[bisect_right(cum[i], pick[i]())]

    # initial placement: round-robin over the departure points
    parking = [i for i, k in enumerate(kinds) if k == SS] or list(range(n_nodes))
    for v in range(plan.fleet_size):
        arrive(parking[v % len(parking)], 0.0)
    for i, k in enumerate(kinds):
        if k == SS:
            seq += 1
            heapq.heappush(heap, (draw[i](), _ARRIVAL, i, seq, 0.0))

    stop = plan.stop
    while heap:
        t, prio, i, _, since = heap[0]
        while t >= next_bound:
            for j in range(n_nodes):
                touch(j, next_bound)
            if batch >= 0:
                row = (area, occ, done, arr, lost, dsum, dcnt)
                for key, vals in zip(out, row):
                    out[key][batch] = vals
            batch += 1
            area = [0.0] * n_nodes
            occ = [0.0] * n_nodes
            done = [0] * n_nodes
            arr = [0] * n_nodes
            lost = [0] * n_nodes
            dsum = [0.0] * n_nodes
            dcnt = [0] * n_nodes
            if batch >= nb:
                break
            next_bound = bounds[batch + 1]
        if batch >= nb or t >= stop:
            break
        heapq.heappop(heap)
        k = kinds[i]
        if k == SS:
            arr[i] += 1
            if n[i]:
                arrive(depart(i, t), t)
            else:
                lost[i] += 1
            seq += 1
            heapq.heappush(heap, (t + draw[i](), _ARRIVAL, i, seq, 0.0))
        elif k == IS:
            arrive(depart(i, t), t)
        else:
            dsum[i] += t - since
            dcnt[i] += 1
            if waiting[i]:
                seq += 1
                heapq.heappush(heap, (t + draw[i](), _COMPLETION, i, seq, waiting[i].popleft()))
            else:
                busy_fs[i] -= 1
            arrive(depart(i, t), t)
        if plan.check and sum(n) != plan.fleet_size:
            raise AssertionError(f"vehicle count {sum(n)} != {plan.fleet_size} at t={t}")
    out["width"] = np.full(nb, width)
    return out


def _run_replications(plan: _Plan, replications: int, workers: int | None):
    reps = range(replications)
    if workers and workers > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replicate, [plan] * replications, reps))
    return [_replicate(plan, r) for r in reps]


def simulate(cfg: SimConfig, workers: int | None = None) -> SimulationReport:
    """Run all replications and pool their batch means.

    Replication ``k`` is seeded from ``base_seed XOR k``; the report does
    not depend on ``workers``.
    """
    plan = _plan(cfg)
    runs = _run_replications(plan, cfg.replications, workers)
    raw = {k: np.stack([r[k] for r in runs]) for k in runs[0]}
    w = raw["width"][..., None]
    model = cfg.model
    ss, fs = model.ss, model.fs
    with np.errstate(invalid="ignore", divide="ignore"):
        node_tp = raw["done"] / w
        batches = {
            "throughput": node_tp.sum(axis=2),
            "node_throughput": node_tp,
            "availability": raw["occupied"][..., ss] / w,
            "loss_fraction": raw["lost"][..., ss] / raw["arrivals"][..., ss],
            "queue_length": raw["area"] / w,
            "fs_delay": raw["delay_sum"][..., fs] / raw["delay_count"][..., fs],
        }
    est = {k: Estimate.pool(v) for k, v in batches.items()}
    seeds = tuple((int(cfg.base_seed) ^ r) & (2**64 - 1) for r in range(cfg.replications))
    return SimulationReport(est["throughput"], est["node_throughput"], est["availability"],
                            est["loss_fraction"], est["queue_length"], est["fs_delay"],
                            seeds, float(cfg.horizon), cfg.effective_warmup, batches)


# --- closed two-queue cycle: one fast charger vs k slow ones ---------------

def two_queue_network(servers: int, t0: float = 0.5, first_rate: float = 2.0) -> NetworkModel:
    """Exponential single server (rate ``first_rate``) in a cycle with a
    charging node of ``servers`` chargers, each of mean ``servers * t0``.

    Every option has the same total charging capacity 1/t0.
    """
    if servers < 1:
        raise InvalidConfig("servers must be >= 1")
    nodes = (Node(NodeKind.SS, float(first_rate), 1, "queue"),
             Node(NodeKind.FS, 1.0 / (servers * t0), servers, f"chargers[{servers}]"))
    return NetworkModel(nodes, sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])))


@dataclass
class TwoQueueResult:
    scv: np.ndarray
    servers: tuple[int, ...]
    throughput: dict[int, np.ndarray]  # servers -> mean over the c^2 grid
    half_width: dict[int, np.ndarray]
    crossings: dict[int, float | None]  # c^2 where k servers overtake the first option
    batches: dict[int, np.ndarray] = field(repr=False, default_factory=dict)

    def difference(self, k: int) -> Estimate:
        """Paired CI of throughput(k) - throughput(servers[0]) per grid point.

        Every option reuses the same seeds, so the pairing removes most of
        the common noise.
        """
        d = self.batches[k] - self.batches[self.servers[0]]  # (grid, reps, batches)
        return Estimate.pool(np.moveaxis(d, 0, -1))

    def rows(self):
        for j, c2 in enumerate(self.scv):
            yield (float(c2), *[(self.throughput[k][j], self.half_width[k][j]) for k in self.servers])


def crossing_point(x: Sequence[float], diff: Sequence[float]) -> float | None:
    """x where ``diff`` turns nonnegative for good, by linear interpolation.

    Uses the last negative-to-nonnegative change, so noise before the
    true crossing does not trigger it.  None if ``diff`` ends negative or
    is never negative.
    """
    x, diff = np.asarray(x, float), np.asarray(diff, float)
    for j in range(len(x) - 1, 0, -1):
        if diff[j] < 0:
            return None
        if diff[j - 1] < 0:
            return float(x[j - 1] + (x[j] - x[j - 1]) * (-diff[j - 1]) / (diff[j] - diff[j - 1]))
    return None


def two_queue_charger_experiment(scv: Sequence[float], servers: Sequence[int] = (1, 2),
                                 family: str = "gamma", t0: float = 0.5, fleet_size: int = 10,
                                 first_rate: float = 2.0, horizon: float = 2e4,
                                 replications: int = 5, base_seed: int = 0,
                                 workers: int | None = None) -> TwoQueueResult:
    """System throughput of the two-queue cycle over a c^2 sweep.

    c^2 = 1 is always simulated with exponential charging, whatever the
    family.  Crossings compare each option against ``servers[0]``.  All
    options share ``base_seed``, so comparisons are paired.
    """
    scv = np.asarray(scv, float)
    if len(servers) < 1:
        raise InvalidConfig("need at least one server option")
    tp, hw, raw = {}, {}, {}
    for k in servers:
        model = two_queue_network(k, t0, first_rate)
        means, widths, batches = [], [], []
        for c2 in scv:
            law = TimeLaw() if c2 == 1.0 and family != "deterministic" else TimeLaw(family, c2)
            cfg = SimConfig(model, fleet_size, horizon, base_seed, replications, charging=law)
            rep = simulate(cfg, workers)
            means.append(float(rep.throughput.mean))
            widths.append(float(rep.throughput.half_width))
            batches.append(rep.batches["throughput"])
        tp[k], hw[k], raw[k] = np.array(means), np.array(widths), np.array(batches)
    ref = servers[0]
    cross = {k: crossing_point(scv, tp[k] - tp[ref]) for k in servers[1:]}
    return TwoQueueResult(scv, tuple(servers), tp, hw, cross, raw)


# --- open M/G/k queue (charger-selection checks) ---------------------------

@dataclass(frozen=True)
class QueueEstimate:
    sojourn: Estimate
    waiting: Estimate


def simulate_open_queue(arrival_rate: float, service: Distribution, servers: int,
                        customers: int, base_seed: int, replications: int = 5,
                        warmup: int | None = None, batches: int = 20) -> QueueEstimate:
    """FCFS M/G/k with Poisson arrivals, batch means over customers."""
    if servers < 1 or customers < batches:
        raise InvalidConfig("need servers >= 1 and at least one customer per batch")
    warmup = customers // 10 if warmup is None else warmup
    soj = np.zeros((replications, batches))
    wait = np.zeros((replications, batches))
    for r in range(replications):
        g_arr, g_svc = node_generators(base_seed, r, 2)
        total = warmup + customers
        arrivals = np.cumsum(g_arr.exponential(1.0 / arrival_rate, total)).tolist()
        svc = service.sample(g_svc, total).tolist()
        free = [0.0] * servers  # heap of server release times
        w = np.empty(total)
        for c in range(total):
            a = arrivals[c]
            start = max(a, free[0])
            heapq.heapreplace(free, start + svc[c])
            w[c] = start - a
        w = w[warmup:]
        s = w + np.asarray(svc[warmup:])
        per = customers // batches
        wait[r] = w[: per * batches].reshape(batches, per).mean(axis=1)
        soj[r] = s[: per * batches].reshape(batches, per).mean(axis=1)
    return QueueEstimate(Estimate.pool(soj), Estimate.pool(wait))
