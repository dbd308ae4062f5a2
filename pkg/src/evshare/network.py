"""Closed-network model of an EV sharing system.

Each station contributes a departure node (single server, served by the
passenger arrival stream) and a charging node (``v`` parallel chargers).
Every origin/destination pair with positive demand gets a travel node
(infinite server).  Vehicles circulate SS -> IS -> (FS ->) SS.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .errors import InvalidStationSpec, MissingTravelTime, ReducibleNetwork

PROB_TOL = 1e-9
DENSE_SOLVE_LIMIT = 5000


class NodeKind(str, enum.Enum):
    SS = "SS"
    IS = "IS"
    FS = "FS"


@dataclass(frozen=True)
class StationSpec:
    id: str
    arrival_rate: float
    charge_prob: float
    mean_charge_time: float
    num_chargers: int
    dest_probs: Mapping[str, float]

    def validate(self) -> None:
        if not self.arrival_rate > 0:
            raise InvalidStationSpec(f"station {self.id!r}: arrival_rate must be > 0")
        if not self.mean_charge_time > 0:
            raise InvalidStationSpec(f"station {self.id!r}: mean_charge_time must be > 0")
        if int(self.num_chargers) != self.num_chargers or self.num_chargers < 1:
            raise InvalidStationSpec(f"station {self.id!r}: num_chargers must be a positive integer")
        if not 0 <= self.charge_prob <= 1:
            raise InvalidStationSpec(f"station {self.id!r}: charge_prob must lie in [0, 1]")
        if self.dest_probs.get(self.id, 0) != 0:
            raise InvalidStationSpec(f"station {self.id!r}: self-destination probability must be 0")
        if any(p < 0 for p in self.dest_probs.values()):
            raise InvalidStationSpec(f"station {self.id!r}: negative destination probability")
        total = math.fsum(float(p) for p in self.dest_probs.values())
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidStationSpec(
                f"station {self.id!r}: destination probabilities sum to {total!r}, not 1"
            )


@dataclass(frozen=True)
class TravelSpec:
    """Mean travel times per (origin, destination), hours.

    ``family``/``scv`` are only read by the simulator; ``scv`` may be a
    scalar or a per-edge mapping.
    """

    mean_time: Mapping[tuple[str, str], float]
    family: str = "exponential"
    scv: float | Mapping[tuple[str, str], float] = 1.0

    def edge_scv(self, edge: tuple[str, str]) -> float:
        if isinstance(self.scv, Mapping):
            return float(self.scv.get(edge, 1.0))
        return float(self.scv)


@dataclass(frozen=True)
class Node:
    kind: NodeKind
    base_rate: float
    servers: float  # math.inf for IS
    label: str = ""
    station: int | None = None  # station index for SS/FS
    origin: int | None = None  # IS bookkeeping
    dest: int | None = None

    def service_rate(self, n):
        """Departure rate with ``n`` vehicles present (vectorised over ``n``)."""
        n = np.asarray(n, dtype=float)
        if self.kind is NodeKind.SS:
            return np.where(n >= 1, self.base_rate, 0.0)
        if self.kind is NodeKind.IS:
            return n * self.base_rate
        return np.minimum(n, self.servers) * self.base_rate

    @property
    def mean_service(self) -> float:
        """Mean time of one service (1 / u(1))."""
        return 1.0 / self.base_rate


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Node list plus routing matrix (stored sparse, CSR).

    ``station_ids`` is non-empty for networks assembled by
    :func:`build_network`; solvers use it to take the station-level
    shortcut for visit ratios.  ``exact_routing`` optionally carries the
    routing entries as fractions, keyed by (row, col).
    """

    nodes: tuple[Node, ...]
    routing: sparse.csr_matrix
    station_ids: tuple[str, ...] = ()
    exact_routing: Mapping[tuple[int, int], Fraction] | None = field(default=None, repr=False)

    def __post_init__(self):
        r = sparse.csr_matrix(self.routing, dtype=float)
        r.eliminate_zeros()
        object.__setattr__(self, "routing", r)
        n = len(self.nodes)
        if r.shape != (n, n):
            raise ValueError("routing matrix shape does not match node count")
        if r.nnz and r.data.min() < 0:
            raise ValueError("routing matrix has negative entries")
        rowsum = np.asarray(r.sum(axis=1)).ravel()
        if np.any(np.abs(rowsum - 1.0) > 1e-12):
            bad = int(np.argmax(np.abs(rowsum - 1.0)))
            raise ValueError(f"routing row {bad} sums to {rowsum[bad]!r}, not 1")

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def station_count(self) -> int:
        return len(self.station_ids)

    def indices(self, kind: NodeKind) -> np.ndarray:
        return np.array([i for i, nd in enumerate(self.nodes) if nd.kind is kind], dtype=int)

    @property
    def ss(self) -> np.ndarray:
        return self.indices(NodeKind.SS)

    @property
    def fs(self) -> np.ndarray:
        return self.indices(NodeKind.FS)

    @property
    def is_(self) -> np.ndarray:
        return self.indices(NodeKind.IS)

    @property
    def chargers(self) -> tuple[int, ...]:
        return tuple(int(self.nodes[i].servers) for i in self.fs)

    def dense_routing(self) -> np.ndarray:
        return self.routing.toarray()

    def successors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(destination indices, probabilities) of routing row ``i``."""
        lo, hi = self.routing.indptr[i], self.routing.indptr[i + 1]
        return self.routing.indices[lo:hi], self.routing.data[lo:hi]

    def with_chargers(self, counts: Sequence[int]) -> "NetworkModel":
        """Same network with the FS server counts replaced (in FS order)."""
        fs = self.fs
        if len(counts) != len(fs):
            raise ValueError(f"expected {len(fs)} charger counts, got {len(counts)}")
        nodes = list(self.nodes)
        for i, v in zip(fs, counts):
            if int(v) != v or v < 1:
                raise ValueError(f"charger count must be a positive integer, got {v!r}")
            nodes[i] = replace(nodes[i], servers=int(v))
        return NetworkModel(tuple(nodes), self.routing, self.station_ids, self.exact_routing)


def build_network(stations: Sequence[StationSpec], travel: TravelSpec) -> NetworkModel:
    """Assemble the node set and routing matrix from station descriptions.

    Node order: SS by station id, FS by station id, then IS sorted by
    (origin id, destination id).  Edges with zero demand get no IS node.
    """
    for st in stations:
        st.validate()
    ids = sorted(st.id for st in stations)
    if len(set(ids)) != len(ids):
        raise InvalidStationSpec("duplicate station ids")
    if len(ids) < 2:
        raise InvalidStationSpec("at least two stations are required")
    by_id = {st.id: st for st in stations}
    pos = {sid: k for k, sid in enumerate(ids)}
    for st in stations:
        unknown = set(st.dest_probs) - set(ids)
        if unknown:
            raise InvalidStationSpec(f"station {st.id!r}: unknown destinations {sorted(unknown)}")

    s = len(ids)
    edges = sorted((o, d) for o in ids for d, p in by_id[o].dest_probs.items() if p > 0)

    nodes: list[Node] = []
    for sid in ids:
        nodes.append(Node(NodeKind.SS, float(by_id[sid].arrival_rate), 1,
                          label=f"SS[{sid}]", station=pos[sid]))
    for sid in ids:
        st = by_id[sid]
        nodes.append(Node(NodeKind.FS, 1.0 / float(st.mean_charge_time), int(st.num_chargers),
                          label=f"FS[{sid}]", station=pos[sid]))
    for o, d in edges:
        try:
            t = float(travel.mean_time[(o, d)])
        except KeyError:
            raise MissingTravelTime(f"no mean travel time for edge {o!r}->{d!r}") from None
        if not t > 0:
            raise MissingTravelTime(f"travel time for {o!r}->{d!r} must be > 0")
        nodes.append(Node(NodeKind.IS, 1.0 / t, math.inf, label=f"IS[{o}->{d}]",
                          origin=pos[o], dest=pos[d]))

    exact: dict[tuple[int, int], Fraction] = {}
    for k, (o, d) in enumerate(edges):
        j = 2 * s + k
        oi, di = pos[o], pos[d]
        pbar = _frac(by_id[d].charge_prob)
        exact[(oi, j)] = _frac(by_id[o].dest_probs[d])
        if pbar > 0:
            exact[(j, s + di)] = pbar
        if pbar < 1:
            exact[(j, di)] = 1 - pbar
    for k in range(s):
        exact[(s + k, k)] = Fraction(1)
    keys = list(exact)
    rows = [k[0] for k in keys]
    cols = [k[1] for k in keys]
    vals = [float(exact[k]) for k in keys]
    n = len(nodes)
    routing = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return NetworkModel(tuple(nodes), routing, tuple(ids), exact)


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def _check_irreducible(model: NetworkModel) -> None:
    """Require exactly one closed class.

    Nodes outside it (e.g. a charging point nobody is sent to) are
    transient and get visit ratio 0; two or more closed classes leave the
    ratios undetermined.
    """
    ncomp, label = connected_components(model.routing, directed=True, connection="strong")
    if ncomp == 1:
        return
    r = model.routing.tocoo()
    leaves = np.zeros(ncomp, bool)
    leaves[label[r.row[label[r.row] != label[r.col]]]] = True
    closed = int(np.sum(~leaves))
    if closed != 1:
        raise ReducibleNetwork(f"routing chain has {closed} closed classes; "
                               "visit ratios are not unique")


def _is_station_structured(model: NetworkModel) -> bool:
    if not model.station_ids:
        return False
    s = model.station_count
    kinds = [nd.kind for nd in model.nodes]
    return (kinds[:s] == [NodeKind.SS] * s and kinds[s:2 * s] == [NodeKind.FS] * s
            and all(k is NodeKind.IS for k in kinds[2 * s:]))


def visit_ratios(model: NetworkModel) -> np.ndarray:
    """Relative node throughputs solving the traffic equations, summing to 1."""
    _check_irreducible(model)
    if _is_station_structured(model):
        return _station_visit_ratios(model)
    n = model.size
    # lambda (I - R) = 0; the last balance equation is swapped for normalisation.
    if n <= DENSE_SOLVE_LIMIT:
        a = (np.eye(n) - model.dense_routing()).T
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        lam = linalg.solve(a, b)
    else:
        a = sparse.lil_matrix((sparse.identity(n) - model.routing).T)
        a[n - 1, :] = np.ones(n)
        b = np.zeros(n)
        b[-1] = 1.0
        lam = spsolve(a.tocsr(), b)
    lam = np.clip(lam, 0.0, None)
    return lam / lam.sum()


def _station_visit_ratios(model: NetworkModel) -> np.ndarray:
    # Every vehicle leaving SS o reaches SS d (possibly via FS d) with
    # probability p_od, so the SS visit ratios are the stationary vector of
    # the station-level chain; IS and FS ratios follow by flow propagation.
    s = model.station_count
    r = model.routing
    p = r[:s, 2 * s:].toarray() @ _is_dest_matrix(model)
    a = (np.eye(s) - p).T
    a[-1, :] = 1.0
    b = np.zeros(s)
    b[-1] = 1.0
    pi = linalg.solve(a, b)
    return _expand_station_ratios(model, pi)


def _is_dest_matrix(model: NetworkModel) -> np.ndarray:
    s = model.station_count
    ism = np.zeros((model.size - 2 * s, s))
    for k, nd in enumerate(model.nodes[2 * s:]):
        ism[k, nd.dest] = 1.0
    return ism


def _expand_station_ratios(model: NetworkModel, pi):
    s = model.station_count
    r = model.routing
    lam = np.zeros(model.size)
    lam[:s] = pi
    lam_is = pi @ r[:s, 2 * s:].toarray()
    lam[2 * s:] = lam_is
    lam[s:2 * s] = lam_is @ r[2 * s:, s:2 * s].toarray()
    lam = np.clip(lam, 0.0, None)
    return lam / lam.sum()


def visit_ratios_exact(model: NetworkModel) -> list[Fraction]:
    """Visit ratios in rational arithmetic.

    Uses the station-level reduction when available (cheap even for
    thousands of nodes); otherwise eliminates the full system.
    """
    _check_irreducible(model)
    if model.exact_routing is not None:
        ex = dict(model.exact_routing)
    else:
        coo = model.routing.tocoo()
        ex = {(int(i), int(j)): _frac(v) for i, j, v in zip(coo.row, coo.col, coo.data)}
    if _is_station_structured(model):
        s = model.station_count
        p = [[Fraction(0)] * s for _ in range(s)]
        for (i, j), v in ex.items():
            if i < s and j >= 2 * s:
                p[i][model.nodes[j].dest] += v
        pi = _solve_stationary(p)
        lam = [Fraction(0)] * model.size
        lam[:s] = pi
        for (i, j), v in ex.items():
            if i < s and j >= 2 * s:
                lam[j] += pi[i] * v
        for (i, j), v in ex.items():
            if i >= 2 * s and s <= j < 2 * s:
                lam[j] += lam[i] * v
        total = sum(lam)
        return [x / total for x in lam]
    n = model.size
    p = [[Fraction(0)] * n for _ in range(n)]
    for (i, j), v in ex.items():
        p[i][j] = v
    return _solve_stationary(p)


def _solve_stationary(p: list[list[Fraction]]) -> list[Fraction]:
    n = len(p)
    # rows of (I - P)^T, last replaced by ones
    a = [[(1 if i == j else 0) - p[j][i] for j in range(n)] for i in range(n)]
    a[-1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            raise ReducibleNetwork("singular balance system")
        a[c], a[piv] = a[piv], a[c]
        b[c], b[piv] = b[piv], b[c]
        inv = 1 / a[c][c]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c] * inv
                row_r, row_c = a[r], a[c]
                for k in range(c, n):
                    if row_c[k]:
                        row_r[k] -= f * row_c[k]
                b[r] -= f * b[c]
    return [b[i] / a[i][i] for i in range(n)]
