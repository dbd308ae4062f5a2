"""Greedy charger allocation on the three-station network, printed next to
the reference table values."""
import argparse
from pathlib import Path

from evshare.chargers import allocate_chargers
from evshare.economics import Economics
from evshare.scenarios import downtown_suburb_network

REFERENCE = {
    (1, 1, 1): (458.16, 478.25, 8, 12.09), (1, 2, 1): (457.53, 479.56, 10, 12.03),
    (2, 1, 1): (533.58, 554.79, 12, 9.21), (3, 1, 1): (530.05, 555.23, 16, 9.18),
    (2, 2, 1): (553.46, 575.89, 14, 8.43), (3, 2, 1): (549.53, 575.93, 18, 8.40),
    (2, 2, 2): (766.58, 783.21, 16, 0.63), (2, 3, 2): (766.98, 785.55, 18, 0.57),
    (3, 2, 2): (769.61, 790.00, 20, 0.39), (3, 3, 2): (769.52, 791.85, 22, 0.33),
    (4, 2, 2): (766.15, 790.51, 24, 0.36),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    m = downtown_suburb_network()
    econ = Economics(revenue=30, charger_cost=(4, 2, 2), loss_penalty=1)
    res = allocate_chargers(m, econ, 40)
    res.write_trace(args.out / "allocation_trace.csv")
    print(f"{'step':>4}  {'V':9}  {'profit':>8} {'revenue':>8} {'cost':>5} {'penalty':>7}"
          f"   reference: profit / penalty")
    for step, v, profit, revenue, cost, penalty in res.table_rows():
        pub = REFERENCE.get(tuple(v))
        ref = f"{pub[0]:8.2f} / {pub[3]:5.2f}" if pub else ""
        label = "(" + ",".join(map(str, v)) + ")"
        print(f"{step:>4}  {label:9}  {profit:8.2f} {revenue:8.2f} {cost:5.0f} {penalty:7.2f}   {ref}")
    print(f"result {res.chargers} ({res.label})")

    bounded = Economics(revenue=30, charger_cost=(4, 2, 2), loss_penalty=1, charger_bounds=(2, 5, 5))
    print("with bounds (2,5,5):", allocate_chargers(m, bounded, 40).chargers)


if __name__ == "__main__":
    main()
