"""Random cell-free deployments and large-scale fading.

APs, users and eavesdroppers are dropped uniformly over a square area.  The
large-scale gain of every link follows the three-slope path-loss rule with
a COST-Hata constant derived from the carrier frequency and antenna heights.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a deployment or run configuration is inconsistent."""


@dataclass(frozen=True)
class DeploymentConfig:
    area_side_m: float = 1000.0
    num_aps: int = 100
    num_users: int = 2
    num_eves: int = 1
    carrier_freq_hz: float = 1.9e9
    ap_height_m: float = 15.0
    user_height_m: float = 1.65
    ref_dist_d0_m: float = 10.0
    ref_dist_d1_m: float = 50.0
    shadowing_enabled: bool = False
    shadowing_sigma_db: float = 8.0
    wrap_around: bool = False
    seed: int | None = None

    def validate(self) -> None:
        if not self.area_side_m > 0:
            raise ConfigurationError("area_side_m must be positive")
        if self.num_aps < 1 or self.num_users < 1 or self.num_eves < 0:
            raise ConfigurationError("need num_aps >= 1, num_users >= 1, num_eves >= 0")
        if self.carrier_freq_hz <= 0 or self.ap_height_m <= 0 or self.user_height_m <= 0:
            raise ConfigurationError("frequency and antenna heights must be positive")
        diagonal = math.sqrt(2.0) * self.area_side_m
        if not 0 < self.ref_dist_d0_m < self.ref_dist_d1_m < diagonal:
            raise ConfigurationError("need 0 < d0 < d1 < area diagonal")
        if self.shadowing_sigma_db < 0:
            raise ConfigurationError("shadowing_sigma_db must be non-negative")

    @property
    def hata_loss_db(self) -> float:
        """COST-Hata constant L in dB (positive number, applied as -L)."""
        lf = math.log10(self.carrier_freq_hz / 1e6)
        return (
            46.3
            + 33.9 * lf
            - 13.82 * math.log10(self.ap_height_m)
            - (1.1 * lf - 0.7) * self.user_height_m
            + (1.56 * lf - 0.8)
        )


@dataclass(frozen=True)
class NetworkRealization:
    ap_positions: np.ndarray
    user_positions: np.ndarray
    eve_positions: np.ndarray
    beta: np.ndarray
    beta_eve: np.ndarray

    @property
    def num_aps(self) -> int:
        return self.beta.shape[0]

    @property
    def num_users(self) -> int:
        return self.beta.shape[1]

    @property
    def num_eves(self) -> int:
        return self.beta_eve.shape[1]

    @classmethod
    def from_gains(cls, beta, beta_eve=None) -> "NetworkRealization":
        """Build a realization directly from gain matrices (positions left empty)."""
        beta = np.atleast_2d(np.asarray(beta, dtype=float))
        m = beta.shape[0]
        if beta_eve is None:
            beta_eve = np.zeros((m, 0))
        beta_eve = np.asarray(beta_eve, dtype=float).reshape(m, -1)
        return cls(
            ap_positions=np.full((m, 2), np.nan),
            user_positions=np.full((beta.shape[1], 2), np.nan),
            eve_positions=np.full((beta_eve.shape[1], 2), np.nan),
            beta=beta,
            beta_eve=beta_eve,
        )

    def to_dict(self) -> dict:
        return {
            "ap_positions": self.ap_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "eve_positions": self.eve_positions.tolist(),
            "beta": self.beta.tolist(),
            "beta_eve": self.beta_eve.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkRealization":
        m = len(data["beta"])
        return cls(
            ap_positions=np.asarray(data["ap_positions"], dtype=float).reshape(m, 2),
            user_positions=np.asarray(data["user_positions"], dtype=float).reshape(-1, 2),
            eve_positions=np.asarray(data["eve_positions"], dtype=float).reshape(-1, 2),
            beta=np.asarray(data["beta"], dtype=float).reshape(m, -1),
            beta_eve=np.asarray(data["beta_eve"], dtype=float).reshape(m, -1),
        )


def path_loss(distance_m, config: DeploymentConfig, rng: np.random.Generator | None = None):
    """Linear-scale large-scale gain at the given planar distance(s).

    Parameters
    ----------
    distance_m : float or array_like
        AP-terminal distance in meters, must be non-negative.
    config : DeploymentConfig
        Supplies the reference distances and COST-Hata inputs.
    rng : numpy.random.Generator, optional
        Needed only when ``config.shadowing_enabled``; log-normal shadowing
        is applied to links beyond the far reference distance.

    Returns
    -------
    float or numpy.ndarray
        ``10 ** (PL_dB / 10)``, same shape as ``distance_m``.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise ValueError("distance must be non-negative")
    loss = config.hata_loss_db
    d0 = config.ref_dist_d0_m / 1000.0
    d1 = config.ref_dist_d1_m / 1000.0
    d_km = np.maximum(d / 1000.0, d0)  # flat below d0, also guards log10(0)
    far = d_km > d1
    pl_db = np.where(
        far,
        -loss - 35.0 * np.log10(d_km),
        -loss - 15.0 * math.log10(d1) - 20.0 * np.log10(d_km),
    )
    if config.shadowing_enabled and config.shadowing_sigma_db > 0:
        if rng is None:
            raise ValueError("shadowing requires a random generator")
        z = rng.standard_normal(pl_db.shape)
        pl_db = pl_db + np.where(far, config.shadowing_sigma_db * z, 0.0)
    gain = 10.0 ** (pl_db / 10.0)
    return gain if gain.ndim else float(gain)


def _distances(a: np.ndarray, b: np.ndarray, side: float, wrap: bool) -> np.ndarray:
    delta = np.abs(a[:, None, :] - b[None, :, :])
    if wrap:
        delta = np.minimum(delta, side - delta)
    return np.sqrt(np.sum(delta**2, axis=-1))


def deploy(config: DeploymentConfig, rng: np.random.Generator | None = None) -> NetworkRealization:
    """Drop APs, users and Eves uniformly and compute all large-scale gains.

    Without an explicit ``rng`` a generator seeded from ``config.seed`` is used,
    so the same config always yields the same realization.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    side = config.area_side_m
    aps = rng.uniform(0.0, side, size=(config.num_aps, 2))
    users = rng.uniform(0.0, side, size=(config.num_users, 2))
    eves = rng.uniform(0.0, side, size=(config.num_eves, 2))
    beta = path_loss(_distances(aps, users, side, config.wrap_around), config, rng)
    beta_eve = path_loss(_distances(aps, eves, side, config.wrap_around), config, rng)
    beta = np.asarray(beta).reshape(config.num_aps, config.num_users)
    beta_eve = np.asarray(beta_eve).reshape(config.num_aps, config.num_eves)
    return NetworkRealization(aps, users, eves, beta, beta_eve)


def config_to_dict(config: DeploymentConfig) -> dict:
    return asdict(config)
