"""Optimal fleet size on the 60-station network, plus its trends in the
availability target and in chargers per station."""
import argparse
from pathlib import Path

from evshare import mva
from evshare.economics import Economics, FleetCost
from evshare.errors import InfeasibleAtCap
from evshare.fleet import optimal_fleet_size
from evshare.network import visit_ratios
from evshare.scenarios import symmetric_network


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    m = symmetric_network()
    res = optimal_fleet_size(m, Economics(30, FleetCost(per_vehicle=4.0), availability_target=0.2))
    res.write_trace(args.out / "fleet_trace.csv")
    print(f"M* = {res.fleet_size}, profit {res.profit:.2f}, "
          f"availability {100 * res.availability.min():.2f}%")

    one = symmetric_network(chargers=1)
    lam = visit_ratios(one)
    a = lam[one.ss[0]] / 10.0 * mva.mva_solve(one, res.fleet_size, lam).system_throughput
    print(f"one charger per station at M = {res.fleet_size}: availability {100 * a:.2f}%")

    print("\ntarget  M*")
    for eps in (0.4, 0.3, 0.2, 0.15, 0.1):
        try:
            r = optimal_fleet_size(m, Economics(30, FleetCost(4.0), availability_target=eps))
            print(f"{1 - eps:6.2f}  {r.fleet_size}")
        except InfeasibleAtCap as exc:
            print(f"{1 - eps:6.2f}  infeasible ({exc})")

    print("\nchargers  M*")
    for v in (2, 3, 4, 6):
        r = optimal_fleet_size(symmetric_network(chargers=v),
                               Economics(30, FleetCost(4.0), availability_target=0.2))
        print(f"{v:8d}  {r.fleet_size}")


if __name__ == "__main__":
    main()
