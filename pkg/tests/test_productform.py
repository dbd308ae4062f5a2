import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_networks, two_station
from evshare import productform
from evshare.errors import NumericalUnderflow
from evshare.network import NodeKind, visit_ratios
from evshare.scenarios import symmetric_network
from oracles import brute_force_g, compositions, ctmc_stationary, ctmc_throughput


def test_g_zero_is_one(toy):
    g = productform.convolution_g(toy, visit_ratios(toy), 0)
    assert g.log_g.tolist() == [0.0]
    assert productform.solve(toy, 0).system_throughput == 0.0


def test_toy_g3_matches_enumeration(toy):
    lam = visit_ratios(toy)
    assert len(list(compositions(3, 4))) == 20
    g = productform.convolution_g(toy, lam, 3).values()
    assert g[3] == pytest.approx(brute_force_g(toy, lam, 3), rel=1e-12)


def test_two_station_matches_ctmc():
    m = two_station()
    sol = productform.solve(m, 2)
    assert sol.system_throughput == pytest.approx(ctmc_throughput(m, 2, sol.lam), rel=1e-9)
    pi = ctmc_stationary(m, 2)
    for i in m.ss:
        empty = sum(p for s, p in pi.items() if s[i] == 0)
        k = list(m.ss).index(i)
        assert sol.availability[k] == pytest.approx(1 - empty, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(small_networks(), st.integers(1, 6))
def test_oracle_equivalence(model, fleet):
    lam = visit_ratios(model)
    g = productform.convolution_g(model, lam, fleet)
    for m in range(fleet + 1):
        ref = brute_force_g(model, lam, m)
        assert math.exp(g.log_g[m]) == pytest.approx(ref, rel=1e-12)
    sol = productform.solve(model, fleet, lam)
    for state, p in ctmc_stationary(model, fleet).items():
        assert sol.state_probability(state) == pytest.approx(p, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(small_networks(), st.integers(1, 6))
def test_marginals(model, fleet):
    sol = productform.solve(model, fleet)
    q = sol.mean_queue_lengths()
    assert q.sum() == pytest.approx(fleet, rel=1e-9)
    for i in range(model.size):
        p = sol.marginal(i)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(p >= -1e-15)
        if model.nodes[i].kind is NodeKind.SS:
            assert np.allclose(sol.marginal_ss(i), p, rtol=0, atol=1e-10)
    avail = sol.availability
    assert np.all((avail >= 0) & (avail <= 1 + 1e-12))
    for k, i in enumerate(model.ss):
        assert avail[k] == pytest.approx(1 - sol.marginal(i)[0], abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(small_networks(), st.integers(1, 6), st.floats(1e-3, 1e3))
def test_scaling_visit_ratios_changes_nothing(model, fleet, c):
    lam = visit_ratios(model)
    a = productform.solve(model, fleet, lam)
    b = productform.solve(model, fleet, lam * c)
    assert b.system_throughput == pytest.approx(a.system_throughput, rel=1e-12)
    for i in range(model.size):
        assert np.allclose(a.marginal(i), b.marginal(i), rtol=1e-10, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(small_networks())
def test_throughput_concave_and_availability_monotone(model):
    lam = visit_ratios(model)
    g = productform.convolution_g(model, lam, 30)
    tp = np.array([g.ratio(m) for m in range(31)])
    assert np.all(np.diff(tp) >= -1e-12 * tp.max())
    assert np.all(tp[:-2] + tp[2:] <= 2 * tp[1:-1] + 1e-9)
    avail = np.array([productform.availability(model, lam, productform.convolution_g(model, lam, m))
                      for m in range(1, 12)])
    assert np.all(np.diff(avail, axis=0) >= -1e-12)


def test_node_throughput_and_loss(three):
    sol = productform.solve(three, 40)
    assert np.allclose(sol.node_throughput, sol.lam * sol.system_throughput)
    assert np.allclose(sol.loss_probability, 1 - sol.availability)


def test_large_network_stays_finite():
    m = symmetric_network()
    g = productform.convolution_g(m, visit_ratios(m), 763)
    assert np.all(np.isfinite(g.log_g))
    with pytest.raises(NumericalUnderflow):
        g.values()
    assert 0 < g.ratio(763) < np.inf
