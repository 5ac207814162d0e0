"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.  The full-scale
outage check (criterion 7) takes hours and only runs with
``CFSECURE_FULL_SCALE=1``.
"""

import json
import os
import warnings

import numpy as np
import pytest

from cfsecure.baselines import heuristic_init, run_proposed
from cfsecure.channel import PilotConfig, lmmse_stats
from cfsecure.cli import RunConfig, main, read_results_csv
from cfsecure.experiments import (
    empirical_cdf,
    outage_probability,
    realization_seed,
    stochastic_dominance_check,
)
from cfsecure.network import DeploymentConfig, deploy
from cfsecure.optimizer import ScaConfig, linearize_leakage_rate, linearize_user_rate
from cfsecure.rates import (
    PowerAllocation,
    mc_validate_leakage,
    mc_validate_user_rate,
    secrecy_report,
)

from conftest import P_P, P_T, random_feasible

warnings.filterwarnings("ignore", message="Solution may be inaccurate")

SEED = 2024


@pytest.fixture
def emit(capsys):
    def _emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return _emit


def instance(m, k, j, index, seed=SEED, area=1000.0):
    rng = np.random.default_rng(realization_seed(seed, index))
    net = deploy(DeploymentConfig(area_side_m=area, num_aps=m, num_users=k, num_eves=j), rng)
    pilots = PilotConfig(k, P_P)
    return net, pilots, lmmse_stats(net, pilots), rng


# --- 1: monotone convergence -------------------------------------------------


def test_criterion_1_sca_monotone_convergence(emit):
    cfg = ScaConfig(p_t=P_T, epsilon=0.01, max_iters=50)
    worst_drop, converged, iters = 0.0, 0, []
    for i in range(100):
        net, _, stats, _ = instance(30, 2, 1, i)
        trace = run_proposed(stats, net, cfg)
        t = np.array(trace.t_values)
        worst_drop = max(worst_drop, float(np.max(t[:-1] - t[1:], initial=0.0)))
        converged += trace.converged and trace.iterations_used <= 50
        iters.append(trace.iterations_used)
    ok = worst_drop <= 1e-6 and converged >= 95
    emit(1, ok, f"largest t decrease {worst_drop:.2e} (tol 1e-6); converged {converged}/100 (need 95); "
                f"median iterations {np.median(iters):.0f}")
    assert ok


# --- 2: exhaustive grid oracle ------------------------------------------------


def grid_optimum(stats, net, points=50):
    """Best clamped secrecy rate over a 50^4 grid of (q1, q2, v1, v2), q + v <= 1 per AP.

    ``q`` is the data share of the AP budget (``p gamma / p_t``) and ``v`` the
    noise share; written out term by term for one user and one Eve.
    """
    g = np.linspace(0.0, 1.0, points)
    a = np.sqrt(P_T * stats.gamma[:, 0])
    bu, be = P_T * net.beta[:, 0], P_T * net.beta_eve[:, 0]
    q1, q2, v1, v2 = np.meshgrid(g, g, g, g, indexing="ij", sparse=True)
    feasible = (q1 + v1 <= 1 + 1e-12) & (q2 + v2 <= 1 + 1e-12)
    rate = np.log2(1 + (a[0] * np.sqrt(q1) + a[1] * np.sqrt(q2)) ** 2 / (bu[0] * (q1 + v1) + bu[1] * (q2 + v2) + 1))
    leak = np.log2(1 + (be[0] * q1 + be[1] * q2) / (be[0] * v1 + be[1] * v2 + 1))
    return float(np.max(np.where(feasible, np.maximum(rate - leak, 0.0), -np.inf)))


@pytest.mark.parametrize("area", [1000.0, 100.0], ids=["reference_area", "compact_area"])
def test_criterion_2_grid_oracle(emit, area):
    cfg = ScaConfig(p_t=P_T)
    hits, gaps, nonzero = 0, [], 0
    for i in range(20):
        net, _, stats, _ = instance(2, 1, 1, i, seed=SEED + int(area))
        sca = run_proposed(stats, net, cfg).final_report.min_secrecy
        best = grid_optimum(stats, net)
        gaps.append(best - sca)
        hits += abs(sca - best) <= 1e-2
        nonzero += best > 1e-3
    ok = hits >= 18
    emit(2, ok, f"[{area:.0f} m side] {hits}/20 within 0.01 bit of the grid (need 18); "
                f"{nonzero} instances with a nonzero optimum; worst grid-minus-SCA {max(gaps):+.4f}")
    assert ok


# --- 3: bound validity and moment identities ----------------------------------


def test_criterion_3_bound_validity(emit):
    bound_violations, worst_moment = 0, 0.0
    for i in range(20):
        net, pilots, stats, rng = instance(50, 2, 1, i)
        alloc = random_feasible(stats, rng)
        user = mc_validate_user_rate(alloc, stats, net, 100_000, pilots=pilots, rng=rng)
        leak = mc_validate_leakage(alloc, stats, net, 100_000, pilots=pilots, rng=rng)
        closed = secrecy_report(alloc, stats, net).user_rate
        bound_violations += int(np.sum(closed > user.ergodic_rate + 2 * user.ergodic_stderr))
        moments = [
            (user.mean_f.real, np.sum(np.sqrt(alloc.p) * stats.gamma, axis=0)),
            (user.an_power, net.beta.T @ alloc.p_v),
            (leak.signal_power, net.beta_eve.T @ (alloc.p * stats.gamma)),
        ]
        for empirical, exact in moments:
            worst_moment = max(worst_moment, float(np.max(np.abs(empirical / exact - 1))))
    ok = bound_violations == 0 and worst_moment <= 0.03
    emit(3, ok, f"bound violations {bound_violations}/40; worst moment mismatch {worst_moment:.2%} (tol 3%)")
    assert ok


# --- 4: leakage approximation at large M -------------------------------------


def test_criterion_4_leakage_approximation(emit):
    rel = []
    for i in range(10):
        net, pilots, stats, rng = instance(100, 2, 1, i)
        alloc = random_feasible(stats, rng)
        closed = secrecy_report(alloc, stats, net).leakage
        mc = mc_validate_leakage(alloc, stats, net, 10_000, pilots=pilots, rng=rng)
        rel.extend(np.abs(closed / mc.rate - 1).ravel())
    worst = float(np.max(rel))
    ok = worst <= 0.05
    emit(4, ok, f"worst relative gap closed-form vs sampled leakage {worst:.1%} (tol 5%); "
                f"median {np.median(rel):.1%} over {len(rel)} pairs")
    assert ok


# --- 5: surrogate contracts ---------------------------------------------------


def test_criterion_5_surrogate_contracts(emit):
    net, _, stats, rng = instance(10, 2, 1, 0)
    x0 = random_feasible(stats, rng)
    base = secrecy_report(x0, stats, net)
    value_err, violations, printed_violations = 0.0, 0, 0
    for k in range(2):
        sur = linearize_user_rate(x0, stats, net, k)
        printed = linearize_user_rate(x0, stats, net, k, tangent=False)
        value_err = max(value_err, abs(sur.evaluate(x0, stats, net) - base.user_rate[k]))
        value_err = max(value_err, abs(printed.evaluate(x0, stats, net) - base.user_rate[k]))
        for _ in range(1000):
            x = random_feasible(stats, rng)
            true = secrecy_report(x, stats, net).user_rate[k]
            violations += sur.evaluate(x, stats, net) > true + 1e-12
            printed_violations += printed.evaluate(x, stats, net) > true + 1e-12

    lin = linearize_leakage_rate(x0, stats, net, 0, 0)
    leak_value_err = abs(lin.evaluate(x0, stats, net) - base.leakage[0, 0])
    grad_p, grad_v = lin.gradient(stats, net)

    def leak(p, pv):
        return secrecy_report(PowerAllocation(p, pv), stats, net).leakage[0, 0]

    # central differences with a step relative to each coordinate
    grad_err = 0.0
    for (m, kk), g in np.ndenumerate(grad_p):
        h = 1e-4 * x0.p[m, kk]
        up, dn = x0.p.copy(), x0.p.copy()
        up[m, kk] += h
        dn[m, kk] -= h
        fd = (leak(up, x0.p_v) - leak(dn, x0.p_v)) / (2 * h)
        grad_err = max(grad_err, abs(g - fd) / max(abs(fd), 1e-300))
    for m, g in enumerate(grad_v):
        h = 1e-4 * x0.p_v[m]
        up, dn = x0.p_v.copy(), x0.p_v.copy()
        up[m] += h
        dn[m] -= h
        fd = (leak(x0.p, up) - leak(x0.p, dn)) / (2 * h)
        grad_err = max(grad_err, abs(g - fd) / max(abs(fd), 1e-300))

    ok = value_err <= 1e-9 and violations == 0 and leak_value_err <= 1e-9 and grad_err <= 1e-4
    emit(5, ok, f"user model: value error {value_err:.1e}, lower-bound violations {violations}/2000 "
                f"(first-order form without the curvature term: {printed_violations}/2000); "
                f"leakage model: value error {leak_value_err:.1e}, worst gradient rel. error {grad_err:.1e}")
    assert ok


# --- 6 and 9: desk-scale CDFs and determinism ---------------------------------


DESK = {"num_aps": 50, "num_users": 2, "num_realizations": 100, "master_seed": SEED,
        "schemes": ["an_sca", "no_an_sca", "maxmin_rate"]}


def run_cli(tmp_dir, name, **overrides):
    cfg = dict(DESK, out_dir=str(tmp_dir / name), **overrides)
    path = tmp_dir / f"{name}.json"
    path.write_text(json.dumps(RunConfig.from_dict(cfg).to_dict()))
    assert main(["run", "--config", str(path)]) == 0
    return tmp_dir / name


@pytest.fixture(scope="module")
def desk_dir(tmp_path_factory):
    return run_cli(tmp_path_factory.mktemp("desk"), "serial_j1", num_eves=1, workers=1)


def test_criterion_6_desk_scale_cdfs(emit, desk_dir, tmp_path):
    j1 = read_results_csv(desk_dir / "results.csv")
    j5 = read_results_csv(run_cli(tmp_path, "j5", num_eves=5) / "results.csv")
    cdf1 = {s: empirical_cdf(v) for s, v in j1.items()}
    cdf5 = {s: empirical_cdf(v) for s, v in j5.items()}
    an_noan = stochastic_dominance_check(cdf1["an_sca"], cdf1["no_an_sca"], 0.05)
    noan_mm = stochastic_dominance_check(cdf1["no_an_sca"], cdf1["maxmin_rate"], 0.05)
    out = {s: outage_probability(v) for s, v in j1.items()}
    more_eves = {s: stochastic_dominance_check(cdf1[s], cdf5[s], 0.05) for s in cdf1}
    ok = (an_noan.holds and noan_mm.holds and out["maxmin_rate"] > 0.05 and out["an_sca"] == 0.0
          and all(r.holds for r in more_eves.values()))
    pairwise = np.mean(np.array(j1["an_sca"]) >= np.array(j1["no_an_sca"]) - 1e-6)
    emit(6, ok, f"AN>noAN violation {an_noan.max_violation:.3f}, noAN>maxmin violation {noan_mm.max_violation:.3f} "
                f"(slack 0.05); outage an_sca {out['an_sca']:.0%}, no_an_sca {out['no_an_sca']:.0%}, "
                f"maxmin_rate {out['maxmin_rate']:.0%}; J=1 over J=5 violations "
                + ", ".join(f"{s} {r.max_violation:.3f}" for s, r in more_eves.items())
                + f"; AN >= noAN per realization in {pairwise:.0%}")
    assert ok


def test_criterion_9_determinism(emit, desk_dir, tmp_path):
    threaded = run_cli(tmp_path, "threads", num_eves=1, workers=4)
    rerun = run_cli(tmp_path, "rerun", num_eves=1, workers=1)
    a = (desk_dir / "results.csv").read_bytes()
    ok = a == (threaded / "results.csv").read_bytes() == (rerun / "results.csv").read_bytes()
    emit(9, ok, f"results.csv ({len(a)} bytes) identical across serial rerun and 4 worker threads: {ok}")
    assert ok


# --- 7: full-scale outage (optional) -----------------------------------------


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("CFSECURE_FULL_SCALE") != "1",
                    reason="hours of conic solves; set CFSECURE_FULL_SCALE=1")
def test_criterion_7_full_scale_outage(emit, tmp_path):
    out = run_cli(tmp_path, "full", num_aps=300, num_eves=1, num_realizations=1000, schemes=["maxmin_rate"])
    outage = outage_probability(read_results_csv(out / "results.csv")["maxmin_rate"])
    ok = abs(outage - 0.2452) <= 0.03
    emit(7, ok, f"max-min-rate outage {outage:.2%} (target 24.52% +- 3 points)")
    assert ok


# --- 8: initializer saturates every budget ------------------------------------


def test_criterion_8_initializer_identity(emit):
    worst = 0.0
    rng = np.random.default_rng(SEED)
    for i in range(100):
        m, k, j = int(rng.integers(1, 80)), int(rng.integers(1, 6)), int(rng.integers(0, 6))
        net, _, stats, _ = instance(m, k, j, i)
        load = heuristic_init(stats, net, P_T).ap_load(stats)
        worst = max(worst, float(np.max(np.abs(load / P_T - 1))))
    ok = worst <= 1e-12
    emit(8, ok, f"worst relative budget mismatch {worst:.1e} over 100 instances (tol 1e-12)")
    assert ok
