"""Initial allocation and the competing power-control schemes."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .channel import ChannelStats
from .network import NetworkRealization
from .optimizer import ScaConfig, ScaTrace, run_sca
from .rates import PowerAllocation, secrecy_report


def heuristic_init(stats: ChannelStats, net: NetworkRealization, p_t: float,
                   with_eves: bool = True) -> PowerAllocation:
    """AN-aware heuristic allocation that spends each AP's full budget.

    Data power favours users with strong estimates at the AP, AN power
    grows with the Eves' large-scale gains at the AP.  ``with_eves=False``
    drops the Eve terms (no AN, all power to data).
    """
    if np.any(stats.gamma <= 0):
        raise ValueError("heuristic allocation needs strictly positive estimate qualities")
    root_gamma = np.sqrt(stats.gamma)
    eve_weight = np.sqrt(net.beta_eve).sum(axis=1) if with_eves else np.zeros(net.num_aps)
    denom = root_gamma.sum(axis=1) + eve_weight
    p = p_t / (root_gamma * denom[:, None])
    p_v = p_t * eve_weight / denom
    return PowerAllocation(p, p_v)


def run_proposed(stats: ChannelStats, net: NetworkRealization, cfg: ScaConfig) -> ScaTrace:
    """AN-aided max-min secrecy SCA from the heuristic initializer.

    Honours ``cfg.enable_an``; with AN disabled this is :func:`run_no_an`.
    """
    if not cfg.enable_an:
        return run_no_an(stats, net, cfg)
    cfg = replace(cfg, secure=True)
    return run_sca(heuristic_init(stats, net, cfg.p_t), stats, net, cfg)


def run_no_an(stats: ChannelStats, net: NetworkRealization, cfg: ScaConfig) -> ScaTrace:
    """Max-min secrecy SCA over data powers only (``p_v = 0``)."""
    cfg = replace(cfg, enable_an=False, secure=True)
    return run_sca(heuristic_init(stats, net, cfg.p_t, with_eves=False), stats, net, cfg)


def run_maxmin_rate(stats: ChannelStats, net: NetworkRealization, cfg: ScaConfig) -> ScaTrace:
    """Security-oblivious max-min user rate; secrecy is only evaluated afterwards.

    The final report still lists leakage and secrecy against every Eve of
    ``net``.
    """
    cfg = replace(cfg, enable_an=False, secure=False)
    return run_sca(heuristic_init(stats, net, cfg.p_t, with_eves=False), stats, net, cfg)


def run_heuristic_only(stats: ChannelStats, net: NetworkRealization, cfg: ScaConfig) -> ScaTrace:
    """The initializer itself, reported as a zero-iteration trace."""
    alloc = heuristic_init(stats, net, cfg.p_t)
    report = secrecy_report(alloc, stats, net)
    trace = ScaTrace(
        t_values=[report.min_raw_gap],
        allocations=[alloc],
        true_min_gap=[report.min_raw_gap],
        converged=True,
        iterations_used=0,
        status="heuristic",
        final_report=report,
    )
    return trace


SCHEMES = {
    "an_sca": run_proposed,
    "no_an_sca": run_no_an,
    "maxmin_rate": run_maxmin_rate,
    "heuristic_only": run_heuristic_only,
}
