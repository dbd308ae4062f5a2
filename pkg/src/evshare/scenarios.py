"""Reference networks used by the experiments, tests and CLI examples."""
from __future__ import annotations

from fractions import Fraction

from .network import NetworkModel, StationSpec, TravelSpec, build_network


def symmetric_network(stations: int = 60, arrival_rate: float = 10.0, travel_time: float = 1 / 3,
                      charge_time: float = 0.5, chargers: int = 2,
                      charge_prob: Fraction = Fraction(1, 3)) -> NetworkModel:
    """Identical stations, destinations uniform over the other stations."""
    ids = [f"s{k:02d}" for k in range(1, stations + 1)]
    share = Fraction(1, stations - 1)
    specs = [StationSpec(i, arrival_rate, charge_prob, charge_time, chargers,
                         {j: share for j in ids if j != i}) for i in ids]
    travel = TravelSpec({(a, b): travel_time for a in ids for b in ids if a != b})
    return build_network(specs, travel)


def downtown_suburb_network(chargers=(1, 1, 1), arrival_rate: float = 10.0,
                            travel_time: float = 1 / 3, charge_time: float = 0.5,
                            charge_prob: Fraction = Fraction(1, 3)) -> NetworkModel:
    """Three stations: s1 downtown, s2/s3 suburbs.

    Downtown riders split evenly between the suburbs; suburban riders head
    downtown with probability 0.6 and to the other suburb otherwise.
    """
    dests = {
        "s1": {"s2": Fraction(1, 2), "s3": Fraction(1, 2)},
        "s2": {"s1": Fraction(3, 5), "s3": Fraction(2, 5)},
        "s3": {"s1": Fraction(3, 5), "s2": Fraction(2, 5)},
    }
    specs = [StationSpec(sid, arrival_rate, charge_prob, charge_time, v, dests[sid])
             for sid, v in zip(("s1", "s2", "s3"), chargers)]
    travel = TravelSpec({(a, b): travel_time for a in dests for b in dests[a]})
    return build_network(specs, travel)
