import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st
from scipy import sparse

sys.path.insert(0, str(Path(__file__).parent))

from evshare.network import NetworkModel, Node, NodeKind, StationSpec, TravelSpec, build_network  # noqa: E402
from evshare.scenarios import downtown_suburb_network, symmetric_network  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def generic_network(kinds, rates, servers, weights) -> NetworkModel:
    nodes = []
    for k, (kind, r, v) in enumerate(zip(kinds, rates, servers)):
        kind = NodeKind(kind)
        srv = 1 if kind is NodeKind.SS else (math.inf if kind is NodeKind.IS else v)
        nodes.append(Node(kind, float(r), srv, f"{kind.value}{k}"))
    w = np.asarray(weights, float)
    return NetworkModel(tuple(nodes), sparse.csr_matrix(w / w.sum(axis=1, keepdims=True)))


def toy4() -> NetworkModel:
    """2 SS, 1 FS with two servers, 1 IS."""
    w = np.array([
        [0, 0, 0, 1.0],  # SS a -> road
        [0, 0, 0, 1.0],  # SS b -> road
        [0.5, 0.5, 0, 0],  # chargers -> SS a / SS b
        [0.3, 0.3, 0.4, 0],  # road -> SS a / SS b / chargers
    ])
    return generic_network(["SS", "SS", "FS", "IS"], [1.2, 0.8, 0.7, 1.5], [1, 1, 2, 1], w)


def two_station(charge_prob=Fraction(1, 2), chargers=(1, 1), rates=(1.0, 1.5),
                charge_time=1.0, travel=1.0) -> NetworkModel:
    specs = [StationSpec("a", rates[0], charge_prob, charge_time, chargers[0], {"b": 1}),
             StationSpec("b", rates[1], charge_prob, charge_time, chargers[1], {"a": 1})]
    return build_network(specs, TravelSpec({("a", "b"): travel, ("b", "a"): travel}))


@st.composite
def small_networks(draw, max_nodes=6):
    """Irreducible networks of 2..max_nodes nodes with mixed node kinds."""
    n = draw(st.integers(2, max_nodes))
    kinds = draw(st.lists(st.sampled_from(["SS", "IS", "FS"]), min_size=n, max_size=n))
    rates = draw(st.lists(st.floats(0.2, 5.0), min_size=n, max_size=n))
    servers = draw(st.lists(st.integers(1, 3), min_size=n, max_size=n))
    perm = draw(st.permutations(range(n)))
    w = np.zeros((n, n))
    for a, b in zip(perm, perm[1:] + perm[:1]):
        w[a, b] = draw(st.floats(0.1, 1.0))  # a Hamiltonian cycle keeps it irreducible
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                                    st.floats(0.05, 1.0)), max_size=2 * n))
    for a, b, x in extra:
        if a != b:
            w[a, b] += x
    return generic_network(kinds, rates, servers, w)


@st.composite
def station_networks(draw, stations=(2, 3), same_charge_time=False):
    """Networks built from station descriptions with random parameters."""
    s = draw(st.integers(*stations))
    shared = draw(st.floats(0.2, 2.0))
    ids = [f"s{k}" for k in range(s)]
    specs, times = [], {}
    for i in ids:
        others = [j for j in ids if j != i]
        raw = draw(st.lists(st.integers(1, 5), min_size=len(others), max_size=len(others)))
        total = sum(raw)
        dests = {j: Fraction(r, total) for j, r in zip(others, raw)}
        specs.append(StationSpec(i, draw(st.floats(0.5, 5.0)),
                                 Fraction(draw(st.integers(0, 4)), 4),
                                 shared if same_charge_time else draw(st.floats(0.2, 2.0)),
                                 draw(st.integers(1, 3)), dests))
        for j in others:
            times[(i, j)] = draw(st.floats(0.1, 2.0))
    return build_network(specs, TravelSpec(times))


@pytest.fixture(scope="session")
def sym60():
    return symmetric_network()


@pytest.fixture(scope="session")
def three():
    return downtown_suburb_network()


@pytest.fixture
def toy():
    return toy4()
