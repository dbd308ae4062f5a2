"""One fast charger or two slow ones: mean delay formulas for isolated queues.

Setting: Poisson arrivals of rate ``a`` at a charging point.  The fast
option is one charger of mean time ``t0``; the slow option is two
chargers of mean ``2 t0`` each.  Both have utilisation ``g = a t0``.

The zero-inflated construction charges a vehicle for an exponential time
of mean ``t0/p0`` with probability ``p0`` and for no time otherwise, which
keeps the mean at ``t0`` and sets c^2 = 2/p0 - 1.  For it the slow
option's waiting time scales by exactly ``1/p0``.

Everything here is plain arithmetic, so ``fractions.Fraction`` inputs give
exact results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import DomainError, UnstableQueue


def _check_utilisation(gamma) -> None:
    if not 0 < gamma < 1:
        raise DomainError(f"utilisation must lie in (0, 1), got {gamma!r}")


def exponential_delays(gamma, t0):
    """Closed-form delays (D1, D2) = (t0/(1-g), t0/(1-g^2)) for the fast and
    slow option under exponential charging.

    D2 here lacks a factor 2: two chargers of mean 2 t0 give
    ``2 t0 / (1 - g^2)`` (see :func:`mmk_sojourn`), which is what the
    simulator measures.  The uncorrected pair is kept for comparison.
    """
    _check_utilisation(gamma)
    if not t0 > 0:
        raise DomainError("t0 must be > 0")
    return t0 / (1 - gamma), t0 / (1 - gamma * gamma)


def mmk_sojourn(arrival_rate: float, mean_service: float, servers: int) -> float:
    """Mean sojourn time in M/M/k (Erlang C)."""
    k = int(servers)
    a = arrival_rate * mean_service  # offered load
    rho = a / k
    if not rho < 1:
        raise UnstableQueue(f"utilisation {rho:g} >= 1")
    head = sum(a ** n / math.factorial(n) for n in range(k))
    tail = a ** k / (math.factorial(k) * (1 - rho))
    wait_prob = tail / (head + tail)
    return wait_prob * mean_service / (k * (1 - rho)) + mean_service


def pk_delay(arrival_rate, service_mean, service_second_moment):
    """M/G/1 mean sojourn: a E[S^2] / (2 (1 - rho)) + E[S]."""
    if not service_mean > 0:
        raise DomainError("service mean must be > 0")
    if service_second_moment < service_mean * service_mean:
        raise DomainError("second moment must be >= mean^2")
    rho = arrival_rate * service_mean
    if not rho < 1:
        raise UnstableQueue(f"utilisation {rho} >= 1")
    return arrival_rate * service_second_moment / (2 * (1 - rho)) + service_mean


@dataclass(frozen=True)
class ZeroInflatedDelays:
    gamma: object
    t0: object
    p0: object
    d1: object  # one fast charger
    d2: object  # two slow chargers
    scv: object
    threshold: object  # 1 + 2/g

    @property
    def slow_pair_faster(self) -> bool:
        return self.d1 > self.d2

    @property
    def above_threshold(self) -> bool:
        return self.scv > self.threshold


def zero_inflated_delays(gamma, t0, p0) -> ZeroInflatedDelays:
    """Delays of both options under zero-inflated exponential charging.

    D1 = (t0/p0) g/(1-g) + t0,  D2 = 2 t0 g^2 / (p0 (1-g^2)) + 2 t0.
    Two slow chargers win (D1 > D2) exactly when c^2 > 1 + 2/g.
    """
    _check_utilisation(gamma)
    if not 0 < p0 <= 1:
        raise DomainError(f"p0 must lie in (0, 1], got {p0!r}")
    if not t0 > 0:
        raise DomainError("t0 must be > 0")
    d1 = (t0 / p0) * gamma / (1 - gamma) + t0
    d2 = 2 * t0 * gamma * gamma / (p0 * (1 - gamma * gamma)) + 2 * t0
    return ZeroInflatedDelays(gamma, t0, p0, d1, d2, 2 / p0 - 1, 1 + 2 / gamma)


@dataclass(frozen=True)
class SweepRow:
    scv: float
    p0: float
    d1: float
    d2: float
    threshold: float
    slow_pair_faster: bool


def charger_sweep(gamma: float, t0: float, scv: Iterable[float]) -> list[SweepRow]:
    """Zero-inflated delays over a c^2 grid (each c^2 >= 1)."""
    rows = []
    for c2 in scv:
        if c2 < 1:
            raise DomainError(f"zero-inflated charging needs c^2 >= 1, got {c2!r}")
        r = zero_inflated_delays(gamma, t0, 2 / (1 + c2))
        rows.append(SweepRow(float(c2), float(r.p0), float(r.d1), float(r.d2),
                             float(r.threshold), r.slow_pair_faster))
    return rows
