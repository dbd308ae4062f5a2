"""Exact stationary analysis by the convolution algorithm.

Normalising constants are kept as natural logarithms, one exponent per
entry: over a fleet of several hundred vehicles ``G(m)`` spans thousands
of decades, so a single scale factor per vector cannot hold it.
All travel (IS) nodes are folded into one factor, using that the
convolution of ``x_i^n / n!`` sequences is ``(sum x_i)^n / n!``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import NumericalUnderflow
from .network import NetworkModel, Node, NodeKind, visit_ratios


def log_factor(node: Node, lam: float, size: int) -> np.ndarray:
    """log k(n) = log(lam^n / prod_{k<=n} u(k)) for n = 0..size-1."""
    n = np.arange(size)
    if lam <= 0:
        out = np.full(size, -np.inf)
        out[0] = 0.0
        return out
    if node.kind is NodeKind.SS:
        return n * np.log(lam / node.base_rate)
    if node.kind is NodeKind.IS:
        return n * np.log(lam / node.base_rate) - gammaln(n + 1)
    steps = np.log(lam / node.base_rate) - np.log(np.minimum(n[1:], node.servers))
    return np.concatenate(([0.0], np.cumsum(steps)))


def log_is_factor(load: float, size: int) -> np.ndarray:
    """Factor of an aggregate of IS nodes with total load sum(lam_i / u_i(1))."""
    n = np.arange(size)
    if load <= 0:
        out = np.full(size, -np.inf)
        out[0] = 0.0
        return out
    return n * np.log(load) - gammaln(n + 1)


def log_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a * b)(m) = sum_{n<=m} a(n) b(m-n), everything in log space."""
    size = len(a)
    idx = np.arange(size)
    lag = idx[:, None] - idx[None, :]
    terms = a[None, :] + b[np.clip(lag, 0, None)]
    terms[lag < 0] = -np.inf
    return logsumexp(terms, axis=1)


@dataclass(frozen=True)
class NormalizingConstants:
    """log G(0..M), each entry with its own exponent."""

    log_g: np.ndarray

    @property
    def fleet_size(self) -> int:
        return len(self.log_g) - 1

    def ratio(self, m: int) -> float:
        """G(m-1) / G(m); zero for m = 0."""
        if m <= 0:
            return 0.0
        return float(np.exp(self.log_g[m - 1] - self.log_g[m]))

    def values(self) -> np.ndarray:
        """Plain G values; raises if they are not representable as doubles."""
        if np.max(np.abs(self.log_g)) > 700:
            raise NumericalUnderflow("G(m) outside double range; use log_g or ratio()")
        return np.exp(self.log_g)


def _factor_list(model: NetworkModel, lam: np.ndarray, size: int):
    """Per-node factors for non-IS nodes, plus the folded IS factor (last)."""
    non_is = [i for i, nd in enumerate(model.nodes) if nd.kind is not NodeKind.IS]
    is_idx = [i for i, nd in enumerate(model.nodes) if nd.kind is NodeKind.IS]
    factors = [log_factor(model.nodes[i], lam[i], size) for i in non_is]
    loads = np.array([lam[i] / model.nodes[i].base_rate for i in is_idx])
    factors.append(log_is_factor(float(loads.sum()), size))
    return non_is, is_idx, loads, factors


def convolution_g(model: NetworkModel, lam: np.ndarray, fleet_size: int) -> NormalizingConstants:
    if fleet_size < 0:
        raise ValueError("fleet size must be >= 0")
    size = fleet_size + 1
    _, _, _, factors = _factor_list(model, np.asarray(lam, float), size)
    g = np.full(size, -np.inf)
    g[0] = 0.0
    for f in factors:
        g = log_convolve(g, f)
    return NormalizingConstants(g)


def throughput(consts: NormalizingConstants, lam: np.ndarray) -> tuple[float, np.ndarray]:
    """System throughput Lambda(M) and node throughputs lam_i * Lambda(M)."""
    sys_tp = consts.ratio(consts.fleet_size)
    return sys_tp, np.asarray(lam, float) * sys_tp


def availability(model: NetworkModel, lam: np.ndarray, consts: NormalizingConstants) -> np.ndarray:
    """P(at least one vehicle) at each SS node, in SS order."""
    ss = model.ss
    rates = np.array([model.nodes[i].base_rate for i in ss])
    return np.asarray(lam, float)[ss] / rates * consts.ratio(consts.fleet_size)


@dataclass
class ProductFormSolution:
    model: NetworkModel
    lam: np.ndarray
    consts: NormalizingConstants
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def fleet_size(self) -> int:
        return self.consts.fleet_size

    @property
    def log_g(self) -> np.ndarray:
        return self.consts.log_g

    @property
    def system_throughput(self) -> float:
        return self.consts.ratio(self.fleet_size)

    @property
    def node_throughput(self) -> np.ndarray:
        return self.lam * self.system_throughput

    @property
    def availability(self) -> np.ndarray:
        return availability(self.model, self.lam, self.consts)

    @property
    def loss_probability(self) -> np.ndarray:
        return 1.0 - self.availability

    @cached_property
    def _parts(self):
        size = self.fleet_size + 1
        non_is, is_idx, loads, factors = _factor_list(self.model, self.lam, size)
        empty = np.full(size, -np.inf)
        empty[0] = 0.0
        prefix = [empty]
        for f in factors:
            prefix.append(log_convolve(prefix[-1], f))
        suffix = [empty]
        for f in reversed(factors):
            suffix.append(log_convolve(suffix[-1], f))
        suffix.reverse()
        return non_is, is_idx, loads, factors, prefix, suffix

    def removed_constant(self, i: int) -> np.ndarray:
        """log G_{-i}(0..M): normalising constant with node ``i`` taken out."""
        non_is, is_idx, loads, factors, prefix, suffix = self._parts
        if self.model.nodes[i].kind is NodeKind.IS:
            k = is_idx.index(i)
            rest = float(np.delete(loads, k).sum())
            key = ("is", rest)
            if key not in self._cache:
                self._cache[key] = log_convolve(prefix[-2], log_is_factor(rest, self.fleet_size + 1))
            return self._cache[key]
        k = non_is.index(i)
        return log_convolve(prefix[k], suffix[k + 1])

    def marginal(self, i: int) -> np.ndarray:
        """p_i(n), n = 0..M, from the node-removed constant."""
        m = self.fleet_size
        k = log_factor(self.model.nodes[i], self.lam[i], m + 1)
        g_rm = self.removed_constant(i)
        logp = k + g_rm[::-1] - self.log_g[m]
        return np.exp(logp)

    def marginal_ss(self, i: int) -> np.ndarray:
        """SS shortcut: p(n) = gamma^n [G(M-n) - gamma G(M-n-1)] / G(M)."""
        node = self.model.nodes[i]
        if node.kind is not NodeKind.SS:
            raise ValueError(f"node {i} is not a single-server node")
        m = self.fleet_size
        lg = self.log_g
        gamma = self.lam[i] / node.base_rate
        n = np.arange(m + 1)
        head = n * np.log(gamma) + lg[m - n] - lg[m]
        prev = np.concatenate((lg[m - n[:-1] - 1], [-np.inf]))
        tail = 1.0 - gamma * np.exp(prev - lg[m - n])
        return np.exp(head) * tail

    def marginals(self) -> list[np.ndarray]:
        return [self.marginal(i) for i in range(self.model.size)]

    def mean_queue_lengths(self) -> np.ndarray:
        n = np.arange(self.fleet_size + 1)
        return np.array([self.marginal(i) @ n for i in range(self.model.size)])

    def state_probability(self, state) -> float:
        """P(n_1, ..., n_N) from the product form."""
        state = np.asarray(state, int)
        if state.sum() != self.fleet_size:
            return 0.0
        total = -self.log_g[self.fleet_size]
        for i, n in enumerate(state):
            total += log_factor(self.model.nodes[i], self.lam[i], n + 1)[n]
        return float(np.exp(total))


def solve(model: NetworkModel, fleet_size: int, lam: np.ndarray | None = None) -> ProductFormSolution:
    """Convolution solution at population ``fleet_size``.

    ``lam`` is renormalised to sum 1, so any positive multiple of the visit
    ratios gives the same answer.
    """
    lam = visit_ratios(model) if lam is None else np.asarray(lam, float)
    lam = lam / lam.sum()
    return ProductFormSolution(model, lam, convolution_g(model, lam, fleet_size))
