"""Command-line entry point: experiments, single runs, bound validation, CDFs.

Configuration is a flat JSON object whose keys mirror :class:`RunConfig`;
every key is optional and defaults to the simulation parameters of the
reference setup (1.9 GHz, 100 mW / 200 mW, -94 dBm noise, tau_c = 200).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .baselines import SCHEMES
from .channel import PilotConfig, lmmse_stats
from .experiments import (
    CSV_COLUMNS,
    ExperimentFailure,
    ExperimentSpec,
    empirical_cdf,
    outage_probability,
    realization_seed,
    run_experiment,
    stochastic_dominance_check,
)
from .network import ConfigurationError, DeploymentConfig, deploy
from .optimizer import ScaConfig
from .rates import mc_validate_leakage, mc_validate_user_rate, secrecy_report

log = logging.getLogger("cfsecure")

EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    # deployment
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
    # physical units
    p_t_mw: float = 100.0
    p_p_mw: float = 200.0
    noise_dbm: float = -94.0
    tau_c: int = 200
    tau_p_mode: str | int = "K"
    apply_prelog: bool = False
    estimator: str = "shared"
    # optimizer
    epsilon: float = 0.01
    max_iters: int = 50
    solver_tol: float = 1e-8
    enable_an: bool = True
    leakage_model: str = "majorizer"
    user_bound: str = "tangent"
    # experiment
    schemes: tuple = ("an_sca", "no_an_sca", "maxmin_rate")
    num_realizations: int = 1000
    master_seed: int = 0
    workers: int = 1
    out_dir: str = "results"

    @property
    def tau_p(self) -> int:
        return self.num_users if self.tau_p_mode == "K" else int(self.tau_p_mode)

    @property
    def tau_d(self) -> int:
        return self.tau_c - self.tau_p

    def validate(self) -> None:
        if self.tau_p_mode != "K" and not (isinstance(self.tau_p_mode, int) and not isinstance(self.tau_p_mode, bool)):
            raise ConfigurationError("tau_p_mode must be 'K' or an integer")
        if self.tau_p < 1 or self.tau_d < 1 or self.tau_p + self.tau_d > self.tau_c:
            raise ConfigurationError("need 1 <= tau_p < tau_c")
        if self.p_t_mw <= 0 or self.p_p_mw <= 0:
            raise ConfigurationError("powers must be positive")
        if self.num_realizations < 1 or self.workers < 1:
            raise ConfigurationError("num_realizations and workers must be positive")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise ConfigurationError(f"bad scheme list {list(self.schemes)}; choose from {sorted(SCHEMES)}")
        self.deployment().validate()
        self.pilots().validate(self.num_users)
        try:
            self.sca().validate()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigurationError(f"unknown config keys: {extra}")
        data = dict(data)
        if "schemes" in data:
            schemes = data["schemes"]
            data["schemes"] = tuple(schemes.split(",") if isinstance(schemes, str) else schemes)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schemes"] = list(self.schemes)
        return out

    def deployment(self) -> DeploymentConfig:
        return DeploymentConfig(
            area_side_m=self.area_side_m,
            num_aps=self.num_aps,
            num_users=self.num_users,
            num_eves=self.num_eves,
            carrier_freq_hz=self.carrier_freq_hz,
            ap_height_m=self.ap_height_m,
            user_height_m=self.user_height_m,
            ref_dist_d0_m=self.ref_dist_d0_m,
            ref_dist_d1_m=self.ref_dist_d1_m,
            shadowing_enabled=self.shadowing_enabled,
            shadowing_sigma_db=self.shadowing_sigma_db,
            wrap_around=self.wrap_around,
        )

    def pilots(self) -> PilotConfig:
        _, p_p = normalize_powers(self)
        return PilotConfig(tau_p=self.tau_p, p_p=p_p, estimator=self.estimator)

    def sca(self) -> ScaConfig:
        p_t, _ = normalize_powers(self)
        return ScaConfig(
            p_t=p_t,
            epsilon=self.epsilon,
            max_iters=self.max_iters,
            solver_tol=self.solver_tol,
            enable_an=self.enable_an,
            leakage_model=self.leakage_model,
            user_bound=self.user_bound,
        )

    def experiment(self) -> ExperimentSpec:
        return ExperimentSpec(
            deployment=self.deployment(),
            pilots=self.pilots(),
            sca=self.sca(),
            schemes=tuple(self.schemes),
            num_realizations=self.num_realizations,
            master_seed=self.master_seed,
            prelog=self.tau_d / self.tau_c if self.apply_prelog else 1.0,
        )


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def normalize_powers(cfg: RunConfig) -> tuple[float, float]:
    """Transmit and pilot powers divided by the thermal noise power."""
    noise_mw = 1000.0 * 10.0 ** ((cfg.noise_dbm - 30.0) / 10.0)
    return cfg.p_t_mw / noise_mw, cfg.p_p_mw / noise_mw


# --- config loading -----------------------------------------------------------


_FLAG_KEYS = {
    "M": "num_aps",
    "K": "num_users",
    "J": "num_eves",
    "realizations": "num_realizations",
    "seed": "master_seed",
    "out_dir": "out_dir",
    "epsilon": "epsilon",
    "workers": "workers",
}


def load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if getattr(args, "scheme", None):
        data["schemes"] = [s for item in args.scheme for s in item.split(",")]
    if getattr(args, "no_an", False):
        data["enable_an"] = False
    return RunConfig.from_dict(data)


# --- output -------------------------------------------------------------------


def write_results_csv(path: Path, records) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.csv_row())


def write_timings_csv(path: Path, records) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("realization_id", "scheme", "wall_ms", "status"))
        for rec in records:
            writer.writerow((rec.realization_id, rec.scheme, f"{rec.wall_ms:.3f}", rec.status))


def read_results_csv(path: Path) -> dict:
    """Per-scheme lists of min secrecy rates from a results file (row order kept)."""
    samples: dict = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            samples.setdefault(row["scheme"], []).append(float(row["min_secrecy_bits"]))
    return samples


def cdf_report(samples: dict, slack: float = 0.05) -> dict:
    schemes = {
        name: {"cdf": [[x, p] for x, p in empirical_cdf(vals)], "outage": outage_probability(vals), "samples": len(vals)}
        for name, vals in samples.items()
    }
    dominance = {}
    names = list(samples)
    for a in names:
        for b in names:
            if a != b:
                rep = stochastic_dominance_check(empirical_cdf(samples[a]), empirical_cdf(samples[b]), slack)
                dominance[f"{a}>{b}"] = {"holds": bool(rep.holds), "max_violation": rep.max_violation}
    return {"schemes": schemes, "dominance": dominance}


# --- subcommands --------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args)
    spec = cfg.experiment()
    out = Path(cfg.out_dir)
    code = EXIT_OK
    try:
        result = run_experiment(spec, workers=cfg.workers)
    except ExperimentFailure as exc:
        log.error("%s", exc)
        result, code = exc.result, EXIT_FAILURES
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(out / "results.csv", result.records)
    write_timings_csv(out / "timings.csv", result.records)
    summary = {"config": cfg.to_dict(), **result.summary()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    for scheme, info in summary["schemes"].items():
        print(f"{scheme:>15s}: outage={info['outage']} failures={info['failures']} samples={info['samples']}")
    return code


def cmd_single(args) -> int:
    cfg = load_config(args)
    rng = np.random.default_rng(realization_seed(cfg.master_seed, args.index))
    net = deploy(cfg.deployment(), rng)
    stats = lmmse_stats(net, cfg.pilots())
    scheme = cfg.schemes[0]
    trace = SCHEMES[scheme](stats, net, cfg.sca())
    payload = {
        "config": cfg.to_dict(),
        "scheme": scheme,
        "realization_index": args.index,
        "trace": trace.to_dict(include_allocations=args.allocations),
    }
    if args.network:
        payload["network"] = net.to_dict()
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK if not trace.status.startswith("solver_failure") else EXIT_FAILURES


def cmd_validate(args) -> int:
    cfg = load_config(args)
    rows = []
    for i in range(args.instances):
        rng = np.random.default_rng(realization_seed(cfg.master_seed, i))
        net = deploy(cfg.deployment(), rng)
        pilots = cfg.pilots()
        stats = lmmse_stats(net, pilots)
        alloc = random_feasible_allocation(stats, cfg.sca().p_t, rng)
        report = secrecy_report(alloc, stats, net)
        user = mc_validate_user_rate(alloc, stats, net, args.draws, pilots=pilots, rng=rng)
        leak = mc_validate_leakage(alloc, stats, net, args.draws, pilots=pilots, rng=rng)
        rows.append({
            "instance": i,
            "closed_form_user_rate": report.user_rate.tolist(),
            "mc_ergodic_user_rate": user.ergodic_rate.tolist(),
            "mc_ergodic_stderr": user.ergodic_stderr.tolist(),
            "bound_holds": bool(np.all(report.user_rate <= user.ergodic_rate + 2 * user.ergodic_stderr)),
            "closed_form_leakage": report.leakage.tolist(),
            "mc_leakage": leak.rate.tolist(),
        })
    print(json.dumps({"config": cfg.to_dict(), "instances": rows}, indent=2))
    return EXIT_OK


def cmd_cdf(args) -> int:
    path = Path(args.results)
    if not path.is_file():
        raise ConfigurationError(f"results file not found: {path}")
    report = cdf_report(read_results_csv(path), slack=args.slack)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def random_feasible_allocation(stats, p_t: float, rng: np.random.Generator):
    """Random allocation with every AP's budget split uniformly at random."""
    from .rates import PowerAllocation

    m, k = stats.gamma.shape
    shares = rng.dirichlet(np.ones(k + 1), size=m) * rng.uniform(0.0, 1.0, size=(m, 1))
    return PowerAllocation(shares[:, :k] * p_t / stats.gamma, shares[:, k] * p_t)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfsecure", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--M", type=int, help="number of APs")
        p.add_argument("--K", type=int, help="number of users")
        p.add_argument("--J", type=int, help="number of eavesdroppers")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--scheme", action="append", help=f"one of {sorted(SCHEMES)} (repeatable)")
        p.add_argument("--no-an", dest="no_an", action="store_true", help="disable artificial noise")
        p.add_argument("--epsilon", type=float, help="SCA convergence threshold (bits)")

    p = sub.add_parser("run", help="full Monte-Carlo experiment")
    common(p)
    p.add_argument("--realizations", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("single", help="one realization, dump the SCA trace as JSON")
    common(p)
    p.add_argument("--index", type=int, default=0, help="realization index under the master seed")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.add_argument("--allocations", action="store_true", help="include every iterate's powers")
    p.add_argument("--network", action="store_true", help="include the deployment")
    p.set_defaults(func=cmd_single)

    p = sub.add_parser("validate", help="Monte-Carlo check of the closed-form rate expressions")
    common(p)
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--draws", type=int, default=100_000)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cdf", help="recompute CDFs and dominance from a results.csv")
    p.add_argument("results")
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cdf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, TypeError) as exc:
        print(f"cfsecure: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
