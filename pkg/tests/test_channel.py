import math

import numpy as np
import pytest

from cfsecure.channel import PilotConfig, draw_channels, estimate_channels, lmmse_stats
from cfsecure.network import ConfigurationError, NetworkRealization


def test_closed_form_hand_value():
    net = NetworkRealization.from_gains(np.array([[1.0, 2.0]]))
    stats = lmmse_stats(net, PilotConfig(tau_p=2, p_p=10.0))
    # sqrt(20) / 61 and 20 / 61, computed by hand
    assert stats.c[0, 0] == pytest.approx(0.07331370418032097, abs=1e-15)
    assert stats.gamma[0, 0] == pytest.approx(0.3278688524590164, abs=1e-15)
    assert stats.gamma[0, 1] == pytest.approx(2 * math.sqrt(20) * 2 * math.sqrt(20) / 61, rel=1e-12)


def test_zero_gain_gives_zero_quality():
    net = NetworkRealization.from_gains(np.array([[0.0, 1.0]]))
    assert lmmse_stats(net, PilotConfig(2, 5.0)).gamma[0, 0] == 0.0


def test_perfect_estimation_limit():
    net = NetworkRealization.from_gains(np.array([[0.3], [1e-3]]))
    stats = lmmse_stats(net, PilotConfig(1, 1e12))
    np.testing.assert_allclose(stats.gamma, net.beta, rtol=1e-6)


def test_orthogonal_estimator_has_no_contamination():
    net = NetworkRealization.from_gains(np.array([[1.0, 2.0]]))
    stats = lmmse_stats(net, PilotConfig(2, 10.0, estimator="orthogonal"))
    assert stats.gamma[0, 0] == pytest.approx(20 / 21)


def test_quality_bounded_by_gain():
    rng = np.random.default_rng(0)
    net = NetworkRealization.from_gains(rng.uniform(0, 1e-9, size=(20, 3)))
    stats = lmmse_stats(net, PilotConfig(3, 1e11))
    assert np.all(stats.gamma <= net.beta)


@pytest.mark.parametrize("tau_p,p_p", [(1, 1.0), (2, 0.0)])
def test_invalid_pilots(tau_p, p_p):
    with pytest.raises(ConfigurationError):
        PilotConfig(tau_p, p_p).validate(num_users=2)


def test_channel_power_and_determinism():
    net = NetworkRealization.from_gains(np.array([[0.5, 0.0], [2.0, 1.0]]), np.array([[0.3], [0.1]]))
    g, ge = draw_channels(net, np.random.default_rng(4), 100_000)
    np.testing.assert_allclose(np.mean(np.abs(g) ** 2, axis=0)[net.beta > 0], net.beta[net.beta > 0], rtol=0.03)
    assert np.all(g[:, 0, 1] == 0)
    np.testing.assert_allclose(np.mean(np.abs(ge) ** 2, axis=0), net.beta_eve, rtol=0.03)
    g2, _ = draw_channels(net, np.random.default_rng(4), 100_000)
    np.testing.assert_array_equal(g, g2)


@pytest.mark.parametrize("estimator", ["shared", "orthogonal"])
def test_estimate_moments(estimator):
    net = NetworkRealization.from_gains(np.array([[1.0, 2.0], [0.2, 0.05]]))
    pilots = PilotConfig(2, 3.0, estimator=estimator)
    stats = lmmse_stats(net, pilots)
    rng = np.random.default_rng(9)
    g, _ = draw_channels(net, rng, 100_000)
    gh = estimate_channels(g, pilots, stats, rng)
    np.testing.assert_allclose(np.mean(np.abs(gh) ** 2, axis=0), stats.gamma, rtol=0.03)
    np.testing.assert_allclose(np.mean(gh * np.conj(g), axis=0).real, stats.gamma, rtol=0.03)
    # estimation error is uncorrelated with the estimate
    err = g - gh
    assert np.all(np.abs(np.mean(err * np.conj(gh), axis=0)) < 0.02 * net.beta)


def test_noiseless_estimate_limit():
    net = NetworkRealization.from_gains(np.array([[1.0], [0.5]]))
    pilots = PilotConfig(1, 1e14)
    stats = lmmse_stats(net, pilots)
    rng = np.random.default_rng(1)
    g, _ = draw_channels(net, rng, 1000)
    np.testing.assert_allclose(estimate_channels(g, pilots, stats, rng), g, atol=1e-6)
