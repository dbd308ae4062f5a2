"""Mean value analysis over the fleet size.

Stage ``m`` needs only the stage ``m-1`` queue lengths and, for charging
nodes, the probabilities of ``0..v-2`` vehicles present (which give the
expected number of idle chargers).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import NonPositiveProbability
from .network import NetworkModel, NodeKind, visit_ratios

PROB_TOL = 1e-9
TRAJECTORY_LIMIT = 10**8


@dataclass
class MvaState:
    fleet_size: int
    throughput: float
    delay: np.ndarray  # D_i(m), hours
    queue: np.ndarray  # L_i(m)
    fs_prob: np.ndarray  # p_i(n, m), n = 0..vmax-1, one row per FS node
    idle: np.ndarray  # s_i(m) per FS node
    approximate: bool = False

    def availability(self, model: NetworkModel, lam: np.ndarray) -> np.ndarray:
        ss = model.ss
        rates = np.array([model.nodes[i].base_rate for i in ss])
        return lam[ss] / rates * self.throughput


@dataclass
class MvaResult:
    """Final stage plus per-stage throughput (index m = 0..M)."""

    state: MvaState
    throughput: np.ndarray
    queue_table: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def system_throughput(self) -> float:
        return self.state.throughput


class _Stepper:
    def __init__(self, model: NetworkModel, lam: np.ndarray, arrival_scv=None):
        self.model = model
        self.lam = np.asarray(lam, float) / np.sum(lam)
        nodes = model.nodes
        self.kind = np.array([nd.kind.value for nd in nodes])
        self.rate1 = np.array([nd.base_rate for nd in nodes])  # u_i(1)
        self.ss = self.kind == NodeKind.SS.value
        self.fs = self.kind == NodeKind.FS.value
        self.is_ = self.kind == NodeKind.IS.value
        self.fs_idx = np.flatnonzero(self.fs)
        self.servers = np.array([int(nodes[i].servers) for i in self.fs_idx], dtype=int)
        self.vmax = int(self.servers.max()) if len(self.servers) else 1
        # (v - n) weights for n = 0..vmax-1 (zero beyond each node's v)
        n = np.arange(self.vmax)
        self.idle_w = np.clip(self.servers[:, None] - n[None, :], 0, None).astype(float)
        self.valid = n[None, :] < self.servers[:, None]
        self.scv = None
        if arrival_scv is not None:
            scv = np.ones(len(nodes))
            ss_idx = np.flatnonzero(self.ss)
            arr = np.broadcast_to(np.asarray(arrival_scv, float), ss_idx.shape)
            if np.any(arr < 0):
                raise ValueError("squared coefficient of variation must be >= 0")
            scv[ss_idx] = arr
            self.scv = scv

    def initial(self) -> MvaState:
        n_nodes = len(self.model.nodes)
        p = np.zeros((len(self.fs_idx), self.vmax))
        p[:, 0] = 1.0
        idle = self.servers.astype(float)
        return MvaState(0, 0.0, np.zeros(n_nodes), np.zeros(n_nodes), p, idle,
                        approximate=self.scv is not None)

    def step(self, prev: MvaState) -> MvaState:
        m = prev.fleet_size + 1
        lam, u1 = self.lam, self.rate1
        d = np.empty_like(u1)
        d[self.is_] = 1.0 / u1[self.is_]
        if self.scv is None:
            d[self.ss] = (1.0 + prev.queue[self.ss]) / u1[self.ss]
        else:
            rho = lam[self.ss] / u1[self.ss] * prev.throughput
            c2 = self.scv[self.ss]
            d[self.ss] = (1.0 + prev.queue[self.ss] - rho + rho * (1.0 + c2) / 2.0) / u1[self.ss]
        # s(m-1) = sum_{n=1}^{v-1} (v-n) p(n-1, m-1) = sum_{j=0}^{v-2} (v-1-j) p(j, m-1)
        shifted = np.clip(self.idle_w - 1.0, 0, None)
        s_prev = np.sum(shifted * prev.fs_prob, axis=1)
        fs = self.fs_idx
        d[fs] = (1.0 + prev.queue[fs] + s_prev) / (self.servers * u1[fs])
        tp = m / np.dot(lam, d)
        q = lam * tp * d

        p = np.zeros_like(prev.fs_prob)
        if self.vmax > 1:
            flow = (lam[fs] * tp / u1[fs])[:, None]
            n = np.arange(1, self.vmax)[None, :]
            p[:, 1:] = flow * prev.fs_prob[:, :-1] / n
            p[~self.valid] = 0.0
        busy_mean = lam[fs] * tp / u1[fs]
        p[:, 0] = 1.0 - (busy_mean + np.sum(self.idle_w[:, 1:] * p[:, 1:], axis=1)) / self.servers
        if np.any(p[:, 0] < -PROB_TOL) or np.any(p[:, 0] > 1 + PROB_TOL):
            bad = int(np.argmax(np.abs(p[:, 0] - 0.5)))
            raise NonPositiveProbability(
                f"charging-node empty probability {p[bad, 0]!r} left [0, 1] at population {m}"
            )
        idle = np.sum(self.idle_w * p, axis=1)
        return MvaState(m, float(tp), d, q, p, idle, approximate=self.scv is not None)


def iterate(model: NetworkModel, lam: np.ndarray | None = None,
            arrival_scv=None) -> Iterator[MvaState]:
    """Yield MVA states for m = 1, 2, ... indefinitely."""
    lam = visit_ratios(model) if lam is None else lam
    stepper = _Stepper(model, lam, arrival_scv)
    state = stepper.initial()
    while True:
        state = stepper.step(state)
        yield state


def _run(model, lam, fleet_size, arrival_scv, trajectory):
    if fleet_size < 1:
        raise ValueError("fleet size must be >= 1")
    lam = visit_ratios(model) if lam is None else lam
    keep = trajectory and fleet_size * model.size <= TRAJECTORY_LIMIT
    tps = np.zeros(fleet_size + 1)
    table = np.zeros((fleet_size + 1, model.size)) if keep else None
    for state in iterate(model, lam, arrival_scv):
        tps[state.fleet_size] = state.throughput
        if keep:
            table[state.fleet_size] = state.queue
        if state.fleet_size == fleet_size:
            break
    meta = {"approximation": arrival_scv is not None}
    return MvaResult(state, tps, table, meta)


def mva_solve(model: NetworkModel, fleet_size: int, lam: np.ndarray | None = None,
              trajectory: bool = False) -> MvaResult:
    """Exact MVA at population ``fleet_size``."""
    return _run(model, lam, fleet_size, None, trajectory)


def mva_general_arrivals(model: NetworkModel, fleet_size: int, arrival_scv,
                         lam: np.ndarray | None = None, trajectory: bool = False) -> MvaResult:
    """MVA with a renewal passenger stream at each SS node (approximate).

    ``arrival_scv`` is the squared coefficient of variation of the
    inter-arrival time, scalar or one value per SS node.
    """
    return _run(model, lam, fleet_size, arrival_scv, trajectory)
