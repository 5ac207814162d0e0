"""Monte-Carlo harness: many random deployments, several schemes, CDF output."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import SCHEMES
from .channel import PilotConfig, lmmse_stats
from .network import DeploymentConfig, deploy
from .optimizer import ScaConfig
from .rates import secrecy_report

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "realization_id",
    "scheme",
    "min_secrecy_bits",
    "min_user_rate_bits",
    "iterations",
    "converged",
)


class ExperimentFailure(RuntimeError):
    """Too many realizations failed; ``result`` holds what was computed."""

    def __init__(self, message: str, result: "ExperimentResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class ExperimentSpec:
    deployment: DeploymentConfig
    pilots: PilotConfig
    sca: ScaConfig
    schemes: tuple = ("an_sca", "no_an_sca", "maxmin_rate")
    num_realizations: int = 100
    master_seed: int = 0
    prelog: float = 1.0
    max_failure_rate: float = 0.05

    def validate(self) -> None:
        if self.num_realizations < 1:
            raise ValueError("num_realizations must be at least 1")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes: {unknown}")
        self.deployment.validate()
        self.sca.validate()


@dataclass(frozen=True)
class RealizationRecord:
    realization_id: int
    scheme: str
    min_secrecy_bits: float
    min_user_rate_bits: float
    min_raw_gap_bits: float
    iterations: int
    converged: bool
    failed: bool
    status: str
    wall_ms: float

    def csv_row(self) -> list:
        # repr keeps floats exactly round-trippable
        return [
            str(self.realization_id),
            self.scheme,
            repr(float(self.min_secrecy_bits)),
            repr(float(self.min_user_rate_bits)),
            str(self.iterations),
            "true" if self.converged else "false",
        ]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list = field(default_factory=list)
    runtime_s: float = 0.0

    def samples(self, scheme: str, metric: str = "min_secrecy_bits") -> list:
        return [getattr(r, metric) for r in self.records if r.scheme == scheme and not r.failed]

    def failures(self, scheme: str) -> int:
        return sum(1 for r in self.records if r.scheme == scheme and r.failed)

    def cdf(self, scheme: str) -> list:
        return empirical_cdf(self.samples(scheme))

    def outage(self, scheme: str) -> float:
        return outage_probability(self.samples(scheme))

    def summary(self) -> dict:
        out = {"runtime_s": self.runtime_s, "num_realizations": self.spec.num_realizations, "schemes": {}}
        for scheme in self.spec.schemes:
            samples = self.samples(scheme)
            out["schemes"][scheme] = {
                "cdf": [[x, p] for x, p in empirical_cdf(samples)] if samples else [],
                "outage": outage_probability(samples) if samples else None,
                "failures": self.failures(scheme),
                "samples": len(samples),
            }
        return out


def realization_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Independent stream for realization ``index``.

    ``SeedSequence([master_seed, index])`` hashes the pair, so the stream of a
    realization never depends on which worker runs it or in what order.
    """
    return np.random.SeedSequence([int(master_seed), int(index)])


def run_realization(spec: ExperimentSpec, index: int) -> list:
    rng = np.random.default_rng(realization_seed(spec.master_seed, index))
    net = deploy(spec.deployment, rng)
    stats = lmmse_stats(net, spec.pilots)
    records = []
    for scheme in spec.schemes:
        tic = time.perf_counter()
        trace = SCHEMES[scheme](stats, net, spec.sca)
        wall_ms = 1000.0 * (time.perf_counter() - tic)
        report = secrecy_report(trace.final_allocation, stats, net, prelog=spec.prelog)
        failed = trace.status.startswith("solver_failure")
        if failed:
            log.warning("realization %d scheme %s failed: %s", index, scheme, trace.status)
        records.append(
            RealizationRecord(
                realization_id=index,
                scheme=scheme,
                min_secrecy_bits=report.min_secrecy,
                min_user_rate_bits=report.min_user_rate,
                min_raw_gap_bits=report.min_raw_gap,
                iterations=trace.iterations_used,
                converged=trace.converged,
                failed=failed,
                status=trace.status,
                wall_ms=wall_ms,
            )
        )
    return records


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress=None) -> ExperimentResult:
    """Run every scheme on ``spec.num_realizations`` independent deployments.

    Results are assembled in realization order, so the output is the same
    for any ``workers``.  Raises :class:`ExperimentFailure` when more than
    ``spec.max_failure_rate`` of the runs hit a solver failure.
    """
    spec.validate()
    tic = time.perf_counter()
    indices = range(spec.num_realizations)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda i: run_realization(spec, i), indices))
    else:
        chunks = []
        for i in indices:
            chunks.append(run_realization(spec, i))
            if progress is not None:
                progress(i + 1, spec.num_realizations)
    order = {s: n for n, s in enumerate(spec.schemes)}
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: (r.realization_id, order[r.scheme]))
    result = ExperimentResult(spec, records, time.perf_counter() - tic)
    failed = sum(r.failed for r in records)
    if failed:
        log.warning("%d of %d runs failed and are excluded from the CDFs", failed, len(records))
    if failed > spec.max_failure_rate * len(records):
        raise ExperimentFailure(f"{failed} of {len(records)} runs failed", result)
    return result


# --- CDF utilities ------------------------------------------------------------


def empirical_cdf(samples) -> list:
    """Right-continuous empirical CDF as ``[(x, F(x)), ...]`` at each distinct sample."""
    x = np.sort(np.asarray(list(samples), dtype=float))
    if x.size == 0:
        raise ValueError("empirical CDF needs at least one sample")
    values, counts = np.unique(x, return_counts=True)
    probs = np.cumsum(counts) / x.size
    return [(float(v), float(p)) for v, p in zip(values, probs)]


def cdf_at(cdf: list, r: float) -> float:
    """Evaluate a step CDF from :func:`empirical_cdf` at ``r``."""
    prob = 0.0
    for x, p in cdf:
        if x <= r:
            prob = p
        else:
            break
    return prob


def outage_probability(samples) -> float:
    """Probability of a zero minimum secrecy rate (the CDF atom at zero)."""
    x = np.asarray(list(samples), dtype=float)
    return float(np.mean(x <= 0.0))


@dataclass(frozen=True)
class DominanceReport:
    holds: bool
    max_violation: float
    worst_rate: float | None
    slack: float


def stochastic_dominance_check(cdf_a: list, cdf_b: list, slack: float = 0.0) -> DominanceReport:
    """Check ``F_a(r) <= F_b(r) + slack`` on the merged support of both CDFs.

    ``a`` dominating ``b`` means ``a``'s distribution sits to the right.
    """
    grid = sorted({x for x, _ in cdf_a} | {x for x, _ in cdf_b})
    worst, at = -np.inf, None
    for r in grid:
        excess = cdf_at(cdf_a, r) - cdf_at(cdf_b, r)
        if excess > worst:
            worst, at = excess, r
    max_violation = max(float(worst), 0.0)
    return DominanceReport(worst <= slack, max_violation, at, slack)
