"""Uplink pilot training: LMMSE statistics and Monte-Carlo channel synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ConfigurationError, NetworkRealization


@dataclass(frozen=True)
class PilotConfig:
    """Pilot length (symbols) and noise-normalized pilot power.

    ``estimator`` selects the LMMSE scaling.  ``"shared"`` keeps the sum of
    all users' gains in the denominator of the scaling coefficient;
    ``"orthogonal"`` keeps only the user's own gain, which is what a perfect
    orthonormal projection yields.
    """

    tau_p: int
    p_p: float
    estimator: str = "shared"

    def validate(self, num_users: int) -> None:
        if self.tau_p < num_users:
            raise ConfigurationError(f"tau_p={self.tau_p} < K={num_users}: pilots cannot be orthonormal")
        if not self.p_p > 0:
            raise ConfigurationError("pilot power must be positive")
        if self.estimator not in ("shared", "orthogonal"):
            raise ConfigurationError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class ChannelStats:
    c: np.ndarray  # M x K LMMSE coefficients
    gamma: np.ndarray  # M x K estimate qualities


def _denominator_load(beta: np.ndarray, pilots: PilotConfig) -> np.ndarray:
    if pilots.estimator == "shared":
        return np.broadcast_to(beta.sum(axis=1, keepdims=True), beta.shape)
    return beta


def lmmse_stats(net: NetworkRealization, pilots: PilotConfig) -> ChannelStats:
    pilots.validate(net.num_users)
    snr = pilots.tau_p * pilots.p_p
    beta = net.beta
    c = np.sqrt(snr) * beta / (snr * _denominator_load(beta, pilots) + 1.0)
    gamma = np.sqrt(snr) * beta * c
    return ChannelStats(c=c, gamma=gamma)


def _crandn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(net: NetworkRealization, rng: np.random.Generator, num_draws: int | None = None):
    """Rayleigh channels ``g = sqrt(beta) * h`` to users and Eves.

    Returns ``(g, g_eve)`` of shapes ``(M, K)`` and ``(M, J)``, or with a
    leading ``num_draws`` axis when requested.
    """
    lead = () if num_draws is None else (num_draws,)
    h = _crandn(rng, lead + net.beta.shape)
    h_eve = _crandn(rng, lead + net.beta_eve.shape)
    return np.sqrt(net.beta) * h, np.sqrt(net.beta_eve) * h_eve


def observation_noise(stats: ChannelStats, snr: float) -> np.ndarray:
    """Variance of the non-signal part of each projected pilot observation.

    Chosen so that ``c`` is the exact LMMSE coefficient, i.e.
    ``E|y|^2 = gamma / c^2``.  Equals one for the orthogonal estimator and
    ``1 + tau_p p_p sum_{k' != k} beta_mk'`` for the shared one.
    """
    c, gamma = stats.c, stats.gamma
    safe_c = np.where(c > 0, c, 1.0)
    var = gamma / safe_c**2 - np.sqrt(snr) * gamma / safe_c
    return np.where(c > 0, np.maximum(var, 0.0), 1.0)


def estimate_channels(g: np.ndarray, pilots: PilotConfig, stats: ChannelStats,
                      rng: np.random.Generator) -> np.ndarray:
    """LMMSE estimates ``c * y`` from synthesized projected pilot observations.

    ``y = sqrt(tau_p p_p) g + n`` with ``n`` independent across users and
    draws; see :func:`observation_noise` for its variance.  ``g`` may carry
    a leading draws axis.
    """
    snr = pilots.tau_p * pilots.p_p
    noise_var = observation_noise(stats, snr)
    y = np.sqrt(snr) * g + np.sqrt(noise_var) * _crandn(rng, g.shape)
    return stats.c * y
