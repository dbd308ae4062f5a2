import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import generic_network, small_networks
from evshare import mva, productform
from evshare.network import visit_ratios


def test_infinite_servers_only():
    w = np.array([[0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]])
    m = generic_network(["IS"] * 3, [1.0, 2.0, 0.5], [1] * 3, w)
    lam = visit_ratios(m)
    times = np.array([1.0, 0.5, 2.0])
    for fleet in (1, 5, 40):
        assert mva.mva_solve(m, fleet).system_throughput == pytest.approx(fleet / (lam @ times), rel=1e-12)


def test_toy_matches_convolution(toy):
    res = mva.mva_solve(toy, 5)
    g = productform.convolution_g(toy, visit_ratios(toy), 5)
    for m in range(1, 6):
        assert res.throughput[m] == pytest.approx(g.ratio(m), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(small_networks(), st.integers(1, 6))
def test_against_convolution(model, fleet):
    lam = visit_ratios(model)
    res = mva.mva_solve(model, fleet, lam, trajectory=True)
    sol = productform.solve(model, fleet, lam)
    s = res.state
    assert s.throughput == pytest.approx(sol.system_throughput, rel=1e-9)
    assert s.queue.sum() == pytest.approx(fleet, abs=1e-8)
    assert s.throughput == pytest.approx(fleet / np.dot(lam, s.delay), rel=1e-12)
    assert np.all(s.queue >= 0)
    assert np.allclose(s.queue, sol.mean_queue_lengths(), rtol=1e-7, atol=1e-9)
    assert np.all(np.diff(res.throughput) >= -1e-12)
    assert np.allclose(res.queue_table.sum(axis=1), np.arange(fleet + 1), atol=1e-8)
    for row, i in enumerate(model.fs):
        k = min(int(model.nodes[i].servers), fleet + 1)
        p = s.fs_prob[row, :k]
        assert np.all((p >= -1e-9) & (p <= 1 + 1e-9))
        assert np.allclose(p, sol.marginal(i)[:k], atol=1e-6)


def test_unit_scv_reproduces_exact(three):
    lam = visit_ratios(three)
    a = mva.mva_solve(three, 40, lam)
    b = mva.mva_general_arrivals(three, 40, 1.0, lam)
    assert b.meta["approximation"] and not a.meta["approximation"]
    assert np.allclose(a.throughput, b.throughput, rtol=1e-12, atol=0)
    assert np.allclose(a.state.delay, b.state.delay, rtol=1e-12, atol=0)


def test_regular_arrivals_shorten_delay(three):
    three = three.with_chargers((3, 2, 2))
    lam = visit_ratios(three)
    prev = mva.mva_solve(three, 39, lam).state
    # from the same stage-(M-1) state, c^2 = 0 at one SS node only changes that node's delay
    exact = mva._Stepper(three, lam).step(prev)
    smooth = mva._Stepper(three, lam, [0.0, 1.0, 1.0]).step(prev)
    assert smooth.delay[0] < exact.delay[0]
    assert np.allclose(smooth.delay[1:], exact.delay[1:], rtol=1e-15)
    rho = lam[0] / three.nodes[0].base_rate * prev.throughput
    expected = (1 + prev.queue[0] - rho + rho / 2) / three.nodes[0].base_rate
    assert smooth.delay[0] == pytest.approx(expected, rel=1e-12)


def test_negative_scv_rejected(three):
    with pytest.raises(ValueError):
        mva.mva_general_arrivals(three, 5, -0.1)


def test_fleet_size_must_be_positive(toy):
    with pytest.raises(ValueError):
        mva.mva_solve(toy, 0)
