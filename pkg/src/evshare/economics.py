"""Revenue/cost parameters shared by the fleet-sizing and charger problems."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidConfig
from .network import NetworkModel


@dataclass(frozen=True)
class FleetCost:
    """Operating cost g(M), dollars per hour.

    Either ``per_vehicle * M`` or a table g(0), g(1), ... that is extended
    linearly with its last increment.  The table must be convex,
    nondecreasing and end with a positive increment (g must grow without
    bound).
    """

    per_vehicle: float | None = None
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.per_vehicle is None) == (self.table is None):
            raise InvalidConfig("fleet cost needs exactly one of per_vehicle or table")
        if self.per_vehicle is not None and not self.per_vehicle > 0:
            raise InvalidConfig("per-vehicle cost must be > 0 so that g(M) is unbounded")
        if self.table is not None:
            t = np.asarray(self.table, float)
            if len(t) < 2:
                raise InvalidConfig("cost table needs at least g(0) and g(1)")
            d = np.diff(t)
            if np.any(d < 0):
                raise InvalidConfig("cost table must be nondecreasing")
            if np.any(np.diff(d) < -1e-12):
                raise InvalidConfig("cost table must be convex (nondecreasing increments)")
            if not d[-1] > 0:
                raise InvalidConfig("cost table must end with a positive increment (g unbounded)")

    def __call__(self, m: int) -> float:
        if self.per_vehicle is not None:
            return self.per_vehicle * m
        t = self.table
        if m < len(t):
            return float(t[m])
        return float(t[-1] + (m - len(t) + 1) * (t[-1] - t[-2]))


@dataclass(frozen=True)
class Economics:
    """Economic inputs.

    Scalars broadcast; sequences are indexed in node order of the
    respective kind (IS for revenue, SS for targets and penalties, FS for
    charger cost and bounds).  ``charger_bounds`` of None means unbounded.
    """

    revenue: float | Sequence[float] = 30.0
    fleet_cost: FleetCost = field(default_factory=lambda: FleetCost(per_vehicle=4.0))
    availability_target: float | Sequence[float] = 0.2  # epsilon: require A >= 1 - eps
    charger_cost: float | Sequence[float] = 0.0
    loss_penalty: float | Sequence[float] = 0.0
    charger_bounds: int | Sequence[int] | None = None

    def _per(self, value, count: int, name: str) -> np.ndarray:
        arr = np.asarray(value, float)
        if arr.ndim == 0:
            arr = np.full(count, float(arr))
        if arr.shape != (count,):
            raise InvalidConfig(f"{name}: expected {count} values, got {arr.size}")
        return arr

    def revenue_vector(self, model: NetworkModel) -> np.ndarray:
        z = self._per(self.revenue, len(model.is_), "revenue")
        if np.any(z < 0):
            raise InvalidConfig("revenue must be >= 0")
        return z

    def epsilon(self, model: NetworkModel) -> np.ndarray:
        e = self._per(self.availability_target, len(model.ss), "availability_target")
        if np.any((e < 0) | (e > 1)):
            raise InvalidConfig("availability targets (epsilon) must lie in [0, 1]")
        return e

    def charger_costs(self, model: NetworkModel) -> np.ndarray:
        c = self._per(self.charger_cost, len(model.fs), "charger_cost")
        if np.any(c < 0):
            raise InvalidConfig("charger cost must be >= 0")
        return c

    def penalties(self, model: NetworkModel) -> np.ndarray:
        b = self._per(self.loss_penalty, len(model.ss), "loss_penalty")
        if np.any(b < 0):
            raise InvalidConfig("loss penalty must be >= 0")
        return b

    def bounds(self, model: NetworkModel) -> np.ndarray:
        if self.charger_bounds is None:
            return np.full(len(model.fs), np.inf)
        b = self._per(self.charger_bounds, len(model.fs), "charger_bounds")
        if np.any(b < 1):
            raise InvalidConfig("charger bounds must be >= 1")
        return b

    def trip_value(self, model: NetworkModel, lam: np.ndarray) -> float:
        """sum_{i in IS} z_i lam_i: revenue per unit of system throughput."""
        return float(np.dot(self.revenue_vector(model), np.asarray(lam)[model.is_]))
