"""Closed-form user/leakage rate bounds, secrecy rates and Monte-Carlo checks.

All powers are noise-normalized.  ``p`` is the ``M x K`` matrix of data
powers and ``p_v`` the length-``M`` vector of artificial-noise powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelStats, PilotConfig, draw_channels, estimate_channels
from .network import NetworkRealization


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray
    p_v: np.ndarray

    @classmethod
    def zeros(cls, num_aps: int, num_users: int) -> "PowerAllocation":
        return cls(np.zeros((num_aps, num_users)), np.zeros(num_aps))

    def validate(self) -> None:
        if np.any(self.p < 0) or np.any(self.p_v < 0):
            raise ValueError("powers must be non-negative")
        if np.any(~np.isfinite(self.p)) or np.any(~np.isfinite(self.p_v)):
            raise ValueError("powers must be finite")

    def ap_load(self, stats: ChannelStats) -> np.ndarray:
        """Per-AP transmit power ``sum_k p_mk gamma_mk + p_mv``."""
        return np.sum(self.p * stats.gamma, axis=1) + self.p_v

    def budget_slack(self, stats: ChannelStats, p_t: float) -> np.ndarray:
        return p_t - self.ap_load(stats)

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "p_v": self.p_v.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PowerAllocation":
        return cls(np.asarray(data["p"], dtype=float), np.asarray(data["p_v"], dtype=float))


@dataclass(frozen=True)
class SinrDecomposition:
    """Signal/interference terms of the user and leakage SINRs.

    ``UI[k, k']`` is the interference that user ``k'``'s stream causes at
    user ``k``; its diagonal equals ``BU``.
    """

    DS: np.ndarray  # (K,)
    BU: np.ndarray  # (K,)
    UI: np.ndarray  # (K, K)
    AN: np.ndarray  # (K,)
    LS: np.ndarray  # (J, K)
    AN_e: np.ndarray  # (J,)

    @property
    def user_interference(self) -> np.ndarray:
        """``IN_k = BU_k + sum_{k' != k} UI_kk' + AN_k + 1``."""
        return self.UI.sum(axis=1) + self.AN + 1.0

    @property
    def eve_interference(self) -> np.ndarray:
        """``IN^e_jk = sum_{k' != k} LS_jk' + AN^e_j + 1``, shape (J, K)."""
        return self.LS.sum(axis=1, keepdims=True) - self.LS + self.AN_e[:, None] + 1.0

    @property
    def user_sinr(self) -> np.ndarray:
        return self.DS / self.user_interference

    @property
    def eve_sinr(self) -> np.ndarray:
        return self.LS / self.eve_interference


@dataclass(frozen=True)
class RateReport:
    user_rate: np.ndarray  # (K,)
    leakage: np.ndarray  # (J, K)
    secrecy: np.ndarray  # (J, K), clamped at zero
    raw_gap: np.ndarray  # (J, K), unclamped R_k - R^e_jk
    min_secrecy: float
    min_raw_gap: float

    @property
    def min_user_rate(self) -> float:
        return float(np.min(self.user_rate))

    def to_dict(self) -> dict:
        return {
            "user_rate": self.user_rate.tolist(),
            "leakage": self.leakage.tolist(),
            "secrecy": self.secrecy.tolist(),
            "raw_gap": self.raw_gap.tolist(),
            "min_secrecy": self.min_secrecy,
            "min_raw_gap": self.min_raw_gap,
        }


def sinr_terms(alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization) -> SinrDecomposition:
    alloc.validate()
    load = alloc.p * stats.gamma
    ds = np.sum(np.sqrt(alloc.p) * stats.gamma, axis=0) ** 2
    ui = net.beta.T @ load
    return SinrDecomposition(
        DS=ds,
        BU=np.diag(ui).copy(),
        UI=ui,
        AN=net.beta.T @ alloc.p_v,
        LS=net.beta_eve.T @ load,
        AN_e=net.beta_eve.T @ alloc.p_v,
    )


def user_rate_bound(alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                    prelog: float = 1.0) -> np.ndarray:
    """Use-and-then-forget lower bound on each user's rate (bits/channel use)."""
    terms = sinr_terms(alloc, stats, net)
    return prelog * np.log2(1.0 + terms.user_sinr)


def leakage_rate_bound(alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                       prelog: float = 1.0) -> np.ndarray:
    """Leakage rate of every user's message at every Eve, shape (J, K)."""
    terms = sinr_terms(alloc, stats, net)
    return prelog * np.log2(1.0 + terms.eve_sinr)


def secrecy_report(alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                   prelog: float = 1.0) -> RateReport:
    """Per-pair secrecy rates and the minimum over all (Eve, user) pairs.

    With no eavesdroppers the minimum secrecy rate is the minimum user rate.
    """
    terms = sinr_terms(alloc, stats, net)
    user = prelog * np.log2(1.0 + terms.user_sinr)
    leak = prelog * np.log2(1.0 + terms.eve_sinr)
    gap = user[None, :] - leak
    secrecy = np.maximum(gap, 0.0)
    if net.num_eves:
        min_sec, min_gap = float(secrecy.min()), float(gap.min())
    else:
        min_sec = min_gap = float(user.min())
    return RateReport(user, leak, secrecy, gap, min_sec, min_gap)


# --- Monte-Carlo validators -------------------------------------------------


@dataclass(frozen=True)
class UserRateMC:
    mean_f: np.ndarray  # (K,) E[f_kk]
    var_f: np.ndarray  # (K,) V(f_kk)
    cross_power: np.ndarray  # (K, K) E|f_kk'|^2
    an_power: np.ndarray  # (K,) E|z_k|^2
    uatf_rate: np.ndarray  # (K,) bound rebuilt from empirical moments
    ergodic_rate: np.ndarray  # (K,) E[log2(1 + instantaneous SINR)]
    ergodic_stderr: np.ndarray  # (K,)
    num_draws: int


@dataclass(frozen=True)
class LeakageMC:
    rate: np.ndarray  # (J, K)
    stderr: np.ndarray  # (J, K)
    signal_power: np.ndarray  # (J, K) E|f^e_jk|^2
    an_power: np.ndarray  # (J,) E|z^e_j|^2
    num_draws: int


def _draw_effective(alloc, stats, net, pilots, rng, n):
    """One chunk of effective gains f (n,K,K), z (n,K), f^e (n,J,K), z^e (n,J)."""
    g, g_eve = draw_channels(net, rng, n)
    g_hat = estimate_channels(g, pilots, stats, rng)
    v = (rng.standard_normal((n, net.num_aps)) + 1j * rng.standard_normal((n, net.num_aps))) / np.sqrt(2.0)
    precoder = np.sqrt(alloc.p) * np.conj(g_hat)  # (n, M, K)
    an = np.sqrt(alloc.p_v) * v  # (n, M)
    f = np.einsum("nmk,nml->nkl", g, precoder)
    z = np.einsum("nmk,nm->nk", g, an)
    f_e = np.einsum("nmj,nml->njl", g_eve, precoder)
    z_e = np.einsum("nmj,nm->nj", g_eve, an)
    return f, z, f_e, z_e


def _chunks(total: int, size: int):
    while total > 0:
        yield min(total, size)
        total -= size


def _implied_pilots(net: NetworkRealization, stats: ChannelStats) -> PilotConfig:
    """Recover the pilot SNR ``tau_p p_p`` from ``gamma = sqrt(snr) beta c``."""
    mask = (net.beta > 0) & (stats.c > 0)
    if not np.any(mask):
        return PilotConfig(tau_p=net.num_users, p_p=1.0)
    root = np.median(stats.gamma[mask] / (net.beta[mask] * stats.c[mask]))
    return PilotConfig(tau_p=1, p_p=float(root**2))


def mc_validate_user_rate(alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                          num_draws: int, pilots: PilotConfig | None = None,
                          rng: np.random.Generator | None = None, chunk: int = 5000) -> UserRateMC:
    """Sample channels/estimates and rebuild the user-side statistics.

    Besides the raw moments, two rates are returned: the bound recomputed
    from empirical moments, and the ergodic rate of a receiver that knows
    its instantaneous effective gain (which the closed-form bound must not
    exceed).
    """
    pilots = _implied_pilots(net, stats) if pilots is None else pilots
    rng = np.random.default_rng() if rng is None else rng
    k = net.num_users
    sum_f = np.zeros(k, dtype=complex)
    sum_abs2 = np.zeros((k, k))
    sum_z = np.zeros(k)
    sum_r = np.zeros(k)
    sum_r2 = np.zeros(k)
    eye = np.eye(k, dtype=bool)
    for n in _chunks(num_draws, chunk):
        f, z, _, _ = _draw_effective(alloc, stats, net, pilots, rng, n)
        diag = f[:, eye]  # (n, K) f_kk
        abs2 = np.abs(f) ** 2
        sum_f += diag.sum(axis=0)
        sum_abs2 += abs2.sum(axis=0)
        sum_z += np.sum(np.abs(z) ** 2, axis=0)
        interf = abs2.sum(axis=2) - abs2[:, eye] + np.abs(z) ** 2 + 1.0
        r = np.log2(1.0 + abs2[:, eye] / interf)
        sum_r += r.sum(axis=0)
        sum_r2 += np.sum(r**2, axis=0)
    mean_f = sum_f / num_draws
    second = sum_abs2 / num_draws
    var_f = np.diag(second) - np.abs(mean_f) ** 2
    cross = np.where(eye, 0.0, second)
    an_power = sum_z / num_draws
    uatf = np.log2(1.0 + np.abs(mean_f) ** 2 / (var_f + cross.sum(axis=1) + an_power + 1.0))
    mean_r = sum_r / num_draws
    var_r = np.maximum(sum_r2 / num_draws - mean_r**2, 0.0)
    return UserRateMC(mean_f, var_f, second * ~eye, an_power, uatf, mean_r,
                      np.sqrt(var_r / num_draws), num_draws)


def mc_validate_leakage(alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                        num_draws: int, pilots: PilotConfig | None = None,
                        rng: np.random.Generator | None = None, chunk: int = 5000) -> LeakageMC:
    """Average of each Eve's instantaneous leakage rate under perfect Eve CSI."""
    pilots = _implied_pilots(net, stats) if pilots is None else pilots
    rng = np.random.default_rng() if rng is None else rng
    j, k = net.num_eves, net.num_users
    if j == 0:
        empty = np.zeros((0, k))
        return LeakageMC(empty, empty, empty, np.zeros(0), num_draws)
    sum_r = np.zeros((j, k))
    sum_r2 = np.zeros((j, k))
    sum_s = np.zeros((j, k))
    sum_z = np.zeros(j)
    for n in _chunks(num_draws, chunk):
        _, _, f_e, z_e = _draw_effective(alloc, stats, net, pilots, rng, n)
        s = np.abs(f_e) ** 2  # (n, J, K)
        zz = np.abs(z_e) ** 2  # (n, J)
        interf = s.sum(axis=2, keepdims=True) - s + zz[:, :, None] + 1.0
        r = np.log2(1.0 + s / interf)
        sum_r += r.sum(axis=0)
        sum_r2 += np.sum(r**2, axis=0)
        sum_s += s.sum(axis=0)
        sum_z += zz.sum(axis=0)
    mean_r = sum_r / num_draws
    var_r = np.maximum(sum_r2 / num_draws - mean_r**2, 0.0)
    return LeakageMC(mean_r, np.sqrt(var_r / num_draws), sum_s / num_draws, sum_z / num_draws, num_draws)
