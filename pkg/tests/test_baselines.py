import numpy as np
import pytest

from cfsecure.baselines import SCHEMES, heuristic_init
from cfsecure.channel import ChannelStats
from cfsecure.network import NetworkRealization
from cfsecure.optimizer import ScaConfig

from conftest import P_T, make_instance


def test_single_ap_hand_value():
    net = NetworkRealization.from_gains(np.array([[1.0]]), np.array([[0.01]]))
    stats = ChannelStats(c=np.ones((1, 1)), gamma=np.array([[0.04]]))
    alloc = heuristic_init(stats, net, p_t=3.0)
    assert alloc.p_v[0] == pytest.approx(1.0, rel=1e-14)  # p_t * 0.1 / (0.2 + 0.1)
    assert alloc.p[0, 0] * 0.04 == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_budget_saturated(seed):
    net, _, stats = make_instance(20, 3, 2, seed)
    for with_eves in (True, False):
        alloc = heuristic_init(stats, net, P_T, with_eves=with_eves)
        np.testing.assert_allclose(alloc.ap_load(stats), P_T, rtol=1e-12)


def test_no_eves_means_no_noise():
    net, _, stats = make_instance(6, 2, 0, seed=1)
    alloc = heuristic_init(stats, net, P_T)
    assert np.all(alloc.p_v == 0)
    root = np.sqrt(stats.gamma)
    np.testing.assert_allclose(alloc.p, P_T / (root * root.sum(axis=1, keepdims=True)), rtol=1e-12)


def test_zero_quality_rejected():
    net = NetworkRealization.from_gains(np.array([[1.0, 1.0]]))
    with pytest.raises(ValueError):
        heuristic_init(ChannelStats(np.ones((1, 2)), np.array([[0.0, 1.0]])), net, 1.0)


@pytest.mark.parametrize("scheme", sorted(SCHEMES))
def test_schemes_feasible(scheme):
    net, _, stats = make_instance(10, 2, 1, seed=3)
    trace = SCHEMES[scheme](stats, net, ScaConfig(p_t=P_T))
    alloc = trace.final_allocation
    assert np.all(alloc.ap_load(stats) <= P_T * (1 + 1e-9))
    assert np.all(alloc.p >= 0) and np.all(alloc.p_v >= 0)
    if scheme in ("no_an_sca", "maxmin_rate"):
        assert np.all(alloc.p_v == 0)


def test_proposed_beats_baselines_here():
    net, _, stats = make_instance(20, 2, 1, seed=4)
    cfg = ScaConfig(p_t=P_T)
    res = {name: SCHEMES[name](stats, net, cfg).final_report.min_secrecy for name in SCHEMES}
    assert res["an_sca"] >= res["no_an_sca"] - 1e-3
    assert res["an_sca"] >= res["maxmin_rate"] - 1e-3


def test_eve_next_to_every_ap_gives_outage():
    beta = np.full((4, 1), 1e-12)
    net = NetworkRealization.from_gains(beta, np.full((4, 1), 1e-9))
    stats = ChannelStats(np.ones((4, 1)), beta * 0.9)
    trace = SCHEMES["maxmin_rate"](stats, net, ScaConfig(p_t=P_T))
    assert trace.final_report.min_secrecy == 0.0
