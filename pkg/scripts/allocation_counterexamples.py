"""Two-station instances where the 2-charger objective is not supermodular
and where the greedy allocation stops short of the best vector."""
import itertools

import numpy as np

from evshare.chargers import allocate_chargers, allocation_objective
from evshare.economics import Economics
from evshare.network import StationSpec, TravelSpec, build_network


def loop(rates, charge_prob=1.0):
    specs = [StationSpec("a", rates[0], charge_prob, 1.0, 1, {"b": 1}),
             StationSpec("b", rates[1], charge_prob, 1.0, 1, {"a": 1})]
    return build_network(specs, TravelSpec({("a", "b"): 1.0, ("b", "a"): 1.0}))


def main():
    m = loop((0.5, 3.0))
    tp = {v: allocation_objective(m, Economics(), 9, v).throughput
          for v in itertools.product(range(1, 3), repeat=2)}
    gap = tp[(2, 2)] + tp[(1, 1)] - tp[(2, 1)] - tp[(1, 2)]
    print("rates (0.5, 3), M = 9: L(2,2) + L(1,1) - L(2,1) - L(1,2) =", f"{gap:.5f}")

    m = loop((1.0, 3.0))
    econ = Economics(revenue=6.0, charger_cost=(1, 1), loss_penalty=1, charger_bounds=(5, 5))
    res = allocate_chargers(m, econ, 11)
    grid = {v: allocation_objective(m, econ, 11, v).profit
            for v in itertools.product(range(1, 6), repeat=2)}
    best = max(grid, key=grid.get)
    print(f"rates (1, 3), M = 11: greedy {res.chargers} h = {res.objective.profit:.4f}; "
          f"best {best} h = {grid[best]:.4f}")
    h = np.array([[grid[(a, b)] for b in range(1, 4)] for a in range(1, 4)])
    print("h(v1, v2), v in 1..3:\n", np.round(h, 4))


if __name__ == "__main__":
    main()
