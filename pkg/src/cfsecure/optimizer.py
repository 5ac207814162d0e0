"""Successive convex approximation for max-min secrecy power control.

Each outer iteration replaces the user-rate constraints by a concave lower
bound and the leakage-rate constraints by their first-order Taylor
expansion, both taken at the current power allocation, and solves the
resulting second-order cone program.

Inside the conic program powers are expressed as fractions of the per-AP
budget, ``q_mk = p_mk gamma_mk / p_t`` and ``q_mv = p_mv / p_t``, which keeps
the solver away from the 1e11-scale noise-normalized powers.  The auxiliary
``u_mk`` stands for ``sqrt(q_mk)`` through the cone ``u_mk^2 <= q_mk``.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .channel import ChannelStats
from .network import NetworkRealization
from .rates import PowerAllocation, RateReport, secrecy_report, sinr_terms

log = logging.getLogger(__name__)

LN2 = math.log(2.0)

# cvxpy tracks its DPP canonicalization scope in a module global, so building
# and compiling problems is not thread-safe.  Every cvxpy call goes through
# this lock; distinct realizations may still run on distinct threads.
_CVXPY_LOCK = threading.RLock()


class SolverFailure(RuntimeError):
    """The conic solver returned no usable point."""


@dataclass(frozen=True)
class ScaConfig:
    p_t: float
    epsilon: float = 0.01
    max_iters: int = 50
    solver_tol: float = 1e-8
    enable_an: bool = True
    secure: bool = True  # False: maximize the minimum user rate, Eves ignored
    leakage_model: str = "majorizer"  # or "taylor" (pure first-order model)
    user_bound: str = "tangent"  # or "printed" (drops the curvature term, not a global bound)
    solver: str = "CLARABEL"

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.p_t > 0:
            raise ValueError("p_t must be positive")
        if self.leakage_model not in ("majorizer", "taylor"):
            raise ValueError(f"unknown leakage_model {self.leakage_model!r}")
        if self.user_bound not in ("tangent", "printed"):
            raise ValueError(f"unknown user_bound {self.user_bound!r}")


# --- surrogates ---------------------------------------------------------------


@dataclass(frozen=True)
class UserRateSurrogate:
    """Concave model of user ``k``'s rate around an expansion point.

    With ``x = sqrt(DS)`` and ``y = IN`` the model is
    ``rate0 + weight * (2 x/x0 - y/y0 - 1 - (x - x0)^2 / y0)``: the tangent
    plane of the convex ``-log2(1 - x^2/(x^2 + y))``, hence a global lower
    bound on the rate.  ``tangent=False`` drops the quadratic term; that
    variant keeps value and gradient at the expansion point but overestimates
    the rate once ``x`` moves away from ``x0``.  A degenerate point (zero
    signal) collapses to the constant 0.
    """

    k: int
    rate0: float
    weight: float
    ds_root0: float
    in0: float
    degenerate: bool = False
    tangent: bool = True

    def evaluate(self, alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization) -> float:
        if self.degenerate:
            return 0.0
        terms = sinr_terms(alloc, stats, net)
        x = math.sqrt(terms.DS[self.k])
        y = terms.user_interference[self.k]
        value = 2.0 * x / self.ds_root0 - y / self.in0 - 1.0
        if self.tangent:
            value -= (x - self.ds_root0) ** 2 / self.in0
        return self.rate0 + self.weight * value


@dataclass(frozen=True)
class LeakageSurrogate:
    """Affine (first-order Taylor) model of the leakage of user ``k`` at Eve ``j``.

    ``rate0 + weight * (LS/LS0 - IN/IN0)``.  A degenerate point (no leaked
    signal) collapses to the constant 0.
    """

    j: int
    k: int
    rate0: float
    weight: float
    ls0: float
    in0: float
    degenerate: bool = False

    def evaluate(self, alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization) -> float:
        if self.degenerate:
            return 0.0
        terms = sinr_terms(alloc, stats, net)
        ls = terms.LS[self.j, self.k]
        y = terms.eve_interference[self.j, self.k]
        return self.rate0 + self.weight * (ls / self.ls0 - y / self.in0)

    def gradient(self, stats: ChannelStats, net: NetworkRealization):
        """Coefficients of the affine model w.r.t. ``p`` (M x K) and ``p_v`` (M)."""
        m, k = stats.gamma.shape
        if self.degenerate:
            return np.zeros((m, k)), np.zeros(m)
        be = net.beta_eve[:, self.j]
        d_in = stats.gamma * be[:, None]
        d_in[:, self.k] = 0.0
        d_ls = np.zeros((m, k))
        d_ls[:, self.k] = stats.gamma[:, self.k] * be
        grad_p = self.weight * (d_ls / self.ls0 - d_in / self.in0)
        grad_v = -self.weight * be / self.in0
        return grad_p, grad_v


@dataclass(frozen=True)
class LeakageMajorizer:
    """Convex upper bound on the leakage of user ``k`` at Eve ``j``.

    With ``T = LS + IN`` (total received power at the Eve, noise included)
    the leakage is ``log2 T - log2 IN``.  The concave first term is replaced
    by its tangent and ``-ln IN`` by ``-ln IN0 + IN0/IN - 1``.  Value and
    gradient agree with :class:`LeakageSurrogate` at the expansion point; the
    difference elsewhere is ``(IN - IN0)^2 / (IN IN0 ln 2) >= 0``.
    """

    j: int
    k: int
    rate0: float
    t0: float
    in0: float

    def evaluate(self, alloc: PowerAllocation, stats: ChannelStats, net: NetworkRealization) -> float:
        terms = sinr_terms(alloc, stats, net)
        y = terms.eve_interference[self.j, self.k]
        total = y + terms.LS[self.j, self.k]
        return self.rate0 + ((total - self.t0) / self.t0 + self.in0 / y - 1.0) / LN2


def majorize_leakage_rate(alloc_n: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                          j: int, k: int) -> LeakageMajorizer:
    terms = sinr_terms(alloc_n, stats, net)
    in0 = float(terms.eve_interference[j, k])
    t0 = in0 + float(terms.LS[j, k])
    return LeakageMajorizer(j, k, math.log2(t0 / in0), t0, in0)


def linearize_user_rate(alloc_n: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                        k: int, tangent: bool = True) -> UserRateSurrogate:
    terms = sinr_terms(alloc_n, stats, net)
    ds0, in0 = float(terms.DS[k]), float(terms.user_interference[k])
    if not (ds0 > 0 and in0 > 0):
        return UserRateSurrogate(k, 0.0, 0.0, 1.0, 1.0, degenerate=True, tangent=tangent)
    sinr = ds0 / in0
    return UserRateSurrogate(
        k=k,
        rate0=math.log2(1.0 + sinr),
        weight=sinr / (1.0 + sinr) / LN2,
        ds_root0=math.sqrt(ds0),
        in0=in0,
        tangent=tangent,
    )


def linearize_leakage_rate(alloc_n: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                           j: int, k: int) -> LeakageSurrogate:
    terms = sinr_terms(alloc_n, stats, net)
    ls0, in0 = float(terms.LS[j, k]), float(terms.eve_interference[j, k])
    if not (ls0 > 0 and in0 > 0):
        return LeakageSurrogate(j, k, 0.0, 0.0, 1.0, 1.0, degenerate=True)
    sinr = ls0 / in0
    return LeakageSurrogate(
        j=j,
        k=k,
        rate0=math.log2(1.0 + sinr),
        weight=sinr / (1.0 + sinr) / LN2,
        ls0=ls0,
        in0=in0,
    )


# --- conic subproblem ---------------------------------------------------------


class ConicSubproblem:
    """Parameterized SOCP for one realization; re-centred every SCA iteration.

    Decision variables: ``q`` (M x K), ``qv`` (M, only with AN), ``u``
    (M x K), ``omega`` (J x K, only when Eves are considered) and ``t``.
    The problem is compiled once; :meth:`update` only refreshes the
    surrogate coefficients.
    """

    def __init__(self, stats: ChannelStats, net: NetworkRealization, cfg: ScaConfig):
        with _CVXPY_LOCK:
            self._build(stats, net, cfg)

    def _build(self, stats: ChannelStats, net: NetworkRealization, cfg: ScaConfig) -> None:
        cfg.validate()
        self.stats, self.net, self.cfg = stats, net, cfg
        m, k = stats.gamma.shape
        j = net.num_eves if cfg.secure else 0
        self.shape = (m, k, j)
        p_t = cfg.p_t

        self.q = cp.Variable((m, k), name="q")
        self.u = cp.Variable((m, k), name="u")
        self.t = cp.Variable(name="t")
        self.qv = cp.Variable(m, name="qv") if cfg.enable_an else None
        self.omega = cp.Variable((j, k), name="omega") if j else None
        qv = self.qv if self.qv is not None else np.zeros(m)
        ap_load = cp.sum(self.q, axis=1) + qv

        # user side: const + sum_m A_mk u_mk - sum_m W_mk (sum_k' q_mk' + qv_m)
        #            - (sum_m R_mk u_mk - r_k)^2   (curvature, zero when printed)
        self.user_const = cp.Parameter(k, name="user_const")
        self.user_signal = cp.Parameter((m, k), nonneg=True, name="user_signal")
        self.user_interf = cp.Parameter((m, k), nonneg=True, name="user_interf")
        user_lhs = (
            self.user_const
            + cp.sum(cp.multiply(self.user_signal, self.u), axis=0)
            - self.user_interf.T @ ap_load
        )
        if cfg.user_bound == "tangent":
            self.user_curv = cp.Parameter((m, k), nonneg=True, name="user_curv")
            self.user_root = cp.Parameter(k, nonneg=True, name="user_root")
            user_lhs = user_lhs - cp.square(cp.sum(cp.multiply(self.user_curv, self.u), axis=0) - self.user_root)
        self.user_lhs = user_lhs

        cons_user, cons_leak = [], []
        if j:
            # leakage side: const + E1 * (b_j . q_k) - E2 * (b_j . (load + qv))
            b = p_t * net.beta_eve  # (M, J), fixed per realization
            leaked = b.T @ self.q  # (J, K)
            spread = b.T @ ap_load  # (J,)
            spread_jk = cp.reshape(spread, (j, 1), order="C") @ np.ones((1, k))
            self.leak_const = cp.Parameter((j, k), name="leak_const")
            if cfg.leakage_model == "taylor":
                # const + E1 * LS_jk - E2 * (sum_k' LS_jk' + AN^e_j)
                self.leak_signal = cp.Parameter((j, k), name="leak_signal")
                self.leak_interf = cp.Parameter((j, k), nonneg=True, name="leak_interf")
                leak_lin = (
                    self.leak_const
                    + cp.multiply(self.leak_signal, leaked)
                    - cp.multiply(self.leak_interf, spread_jk)
                )
            else:
                # const + spread / (T0 ln2) + 1 / (ln2 IN_jk / IN0), IN_jk = spread - LS_jk + 1;
                # IN is normalized by IN0 to keep the hyperbolic cone balanced
                self.leak_total = cp.Parameter((j, k), nonneg=True, name="leak_total")
                self.leak_inverse = cp.Parameter((j, k), nonneg=True, name="leak_inverse")
                self.eve_interf = spread_jk - leaked + 1.0
                leak_lin = (
                    self.leak_const
                    + cp.multiply(self.leak_total, spread_jk)
                    + cp.inv_pos(cp.multiply(self.leak_inverse, self.eve_interf)) / LN2
                )
            self.leak_lin = leak_lin
            for jj in range(j):
                cons_user.append(user_lhs >= self.t + self.omega[jj, :])
            cons_leak.append(leak_lin <= self.omega)
        else:
            self.leak_lin = None
            cons_user.append(user_lhs >= self.t)

        cons_power = [ap_load <= 1.0]
        cons_nonneg = [self.q >= 0]
        if self.qv is not None:
            cons_nonneg.append(self.qv >= 0)
        cons_cone = [cp.square(self.u) <= self.q]
        self.constraint_groups = {
            "user": cons_user,
            "leakage": cons_leak,
            "power": cons_power,
            "nonneg": cons_nonneg,
            "cone": cons_cone,
        }
        constraints = cons_user + cons_leak + cons_power + cons_nonneg + cons_cone
        self.problem = cp.Problem(cp.Maximize(self.t), constraints)
        self.user_surrogates: list[UserRateSurrogate] = []
        self.leak_surrogates: list = []

    # scalar counts per group, matching the entries of each vector constraint
    def constraint_counts(self) -> dict:
        return {name: int(sum(c.size for c in group)) for name, group in self.constraint_groups.items()}

    def variable_count(self) -> int:
        return int(sum(v.size for v in self.problem.variables()))

    def update(self, alloc_n: PowerAllocation) -> None:
        """Re-centre both surrogate families at ``alloc_n``."""
        stats, net, p_t = self.stats, self.net, self.cfg.p_t
        m, k, j = self.shape
        a = np.sqrt(p_t * stats.gamma)  # sqrt(p_mk) gamma_mk = a_mk sqrt(q_mk)
        const = np.zeros(k)
        signal = np.zeros((m, k))
        interf = np.zeros((m, k))
        curv = np.zeros((m, k))
        root = np.zeros(k)
        tangent = self.cfg.user_bound == "tangent"
        users = [linearize_user_rate(alloc_n, stats, net, kk, tangent=tangent) for kk in range(k)]
        for s in users:
            if s.degenerate:
                continue
            const[s.k] = s.rate0 - s.weight * (1.0 + 1.0 / s.in0)
            signal[:, s.k] = 2.0 * s.weight * a[:, s.k] / s.ds_root0
            interf[:, s.k] = s.weight * p_t * net.beta[:, s.k] / s.in0
            # weight (x - x0)^2 / y0 = (c x/x0 - c)^2 with c^2 = weight x0^2 / y0
            c = math.sqrt(s.weight * s.ds_root0**2 / s.in0)
            curv[:, s.k] = c * a[:, s.k] / s.ds_root0
            root[s.k] = c
        self.user_const.value = const
        self.user_signal.value = signal
        self.user_interf.value = interf
        if tangent:
            self.user_curv.value = curv
            self.user_root.value = root
        self.user_surrogates = users
        if j and self.cfg.leakage_model == "majorizer":
            leaks = [majorize_leakage_rate(alloc_n, stats, net, jj, kk) for jj in range(j) for kk in range(k)]
            t0 = np.array([s.t0 for s in leaks]).reshape(j, k)
            in0 = np.array([s.in0 for s in leaks]).reshape(j, k)
            rate0 = np.array([s.rate0 for s in leaks]).reshape(j, k)
            self.leak_const.value = rate0 + (1.0 / t0 - 2.0) / LN2
            self.leak_total.value = 1.0 / (t0 * LN2)
            self.leak_inverse.value = 1.0 / in0
            self.leak_surrogates = leaks
        elif j:
            lc = np.zeros((j, k))
            ls = np.zeros((j, k))
            li = np.zeros((j, k))
            leaks = []
            for jj in range(j):
                for kk in range(k):
                    s = linearize_leakage_rate(alloc_n, stats, net, jj, kk)
                    leaks.append(s)
                    if s.degenerate:
                        continue
                    # LS/LS0 - IN/IN0 with IN = spread - leaked + 1
                    lc[jj, kk] = s.rate0 - s.weight / s.in0
                    ls[jj, kk] = s.weight * (1.0 / s.ls0 + 1.0 / s.in0)
                    li[jj, kk] = s.weight / s.in0
            self.leak_const.value = lc
            self.leak_signal.value = ls
            self.leak_interf.value = li
            self.leak_surrogates = leaks

    def point_values(self, alloc: PowerAllocation):
        """Scaled variable values ``(q, qv, u)`` representing ``alloc``."""
        q = alloc.p * self.stats.gamma / self.cfg.p_t
        qv = alloc.p_v / self.cfg.p_t
        return q, qv, np.sqrt(q)

    def expansion_point_slack(self, alloc: PowerAllocation) -> dict:
        """Constraint residuals of ``alloc`` with the canonical slack choice.

        ``omega`` is set to the leakage rates, ``u = sqrt(q)`` and ``t`` to the
        minimum (unclamped) gap; the result maps group name to min residual
        (non-negative means satisfied).
        """
        out = {}
        with _CVXPY_LOCK:
            self._assign(alloc)
            for name, group in self.constraint_groups.items():
                if group:
                    out[name] = min(float(-np.max(c.expr.value)) for c in group)
        return out

    def _assign(self, alloc: PowerAllocation) -> None:
        q, qv, u = self.point_values(alloc)
        self.q.value, self.u.value = q, u
        if self.qv is not None:
            self.qv.value = qv
        m, k, j = self.shape
        users = np.array([s.evaluate(alloc, self.stats, self.net) for s in self.user_surrogates])
        if j:
            leak = np.array([s.evaluate(alloc, self.stats, self.net) for s in self.leak_surrogates]).reshape(j, k)
            self.omega.value = leak
            self.t.value = float(np.min(users[None, :] - leak))
        else:
            self.t.value = float(np.min(users))


def build_subproblem(alloc_n: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
                     cfg: ScaConfig) -> ConicSubproblem:
    sp = ConicSubproblem(stats, net, cfg)
    sp.update(alloc_n)
    return sp


def solve_subproblem(sp: ConicSubproblem, cfg: ScaConfig | None = None):
    """Solve the current subproblem; returns ``(PowerAllocation, t_star)``.

    Raises :class:`SolverFailure` when the solver reports anything other
    than an optimal (or optimal-inaccurate) status.
    """
    cfg = sp.cfg if cfg is None else cfg
    error = "no attempt"
    # one retry at a looser tolerance before giving up
    for tol in (cfg.solver_tol, max(cfg.solver_tol * 100, 1e-6)):
        opts = {}
        if cfg.solver == "CLARABEL":
            opts = {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol}
        try:
            with _CVXPY_LOCK:
                sp.problem.solve(solver=cfg.solver, **opts)
        except cp.SolverError as exc:
            error = str(exc)
            continue
        if sp.problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and sp.t.value is not None:
            break
        error = f"solver status {sp.problem.status}"
    else:
        raise SolverFailure(error)
    q = np.maximum(np.asarray(sp.q.value), 0.0)
    qv = np.maximum(np.asarray(sp.qv.value), 0.0) if sp.qv is not None else np.zeros(q.shape[0])
    load = q.sum(axis=1) + qv
    over = load > 1.0
    if np.any(over):
        q[over] /= load[over, None]
        qv[over] /= load[over]
    gamma = sp.stats.gamma
    p = np.where(gamma > 0, q * cfg.p_t / np.where(gamma > 0, gamma, 1.0), 0.0)
    return PowerAllocation(p, qv * cfg.p_t), float(sp.t.value)


# --- outer loop ---------------------------------------------------------------


@dataclass
class ScaTrace:
    t_values: list = field(default_factory=list)  # t[0] is the initial point's value
    allocations: list = field(default_factory=list)
    true_min_gap: list = field(default_factory=list)
    solve_seconds: list = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    status: str = "running"
    final_report: RateReport | None = None

    @property
    def final_allocation(self) -> PowerAllocation:
        return self.allocations[-1]

    @property
    def final_t(self) -> float:
        return self.t_values[-1]

    def to_dict(self, include_allocations: bool = False) -> dict:
        out = {
            "t": list(self.t_values),
            "true_min_gap": list(self.true_min_gap),
            "solve_seconds": list(self.solve_seconds),
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "status": self.status,
            "final_report": None if self.final_report is None else self.final_report.to_dict(),
        }
        if include_allocations:
            out["allocations"] = [a.to_dict() for a in self.allocations]
        return out


def _objective_value(alloc: PowerAllocation, stats, net, cfg: ScaConfig) -> float:
    report = secrecy_report(alloc, stats, net)
    if cfg.secure and net.num_eves:
        return report.min_raw_gap
    return report.min_user_rate


def run_sca(initial: PowerAllocation, stats: ChannelStats, net: NetworkRealization,
            cfg: ScaConfig) -> ScaTrace:
    """Iterate subproblem solves until ``|t[n] - t[n-1]| <= epsilon``.

    ``t[0]`` is the true objective at ``initial`` (the subproblem value of the
    initial point), so the first solve can only improve on it.  A solver
    failure ends the run with the last good iterate and ``converged=False``.
    """
    cfg.validate()
    initial.validate()
    if not cfg.enable_an:
        initial = PowerAllocation(initial.p, np.zeros_like(initial.p_v))
    trace = ScaTrace()
    start = _objective_value(initial, stats, net, cfg)
    trace.t_values.append(start)
    trace.true_min_gap.append(start)
    trace.allocations.append(initial)
    sp = ConicSubproblem(stats, net, cfg)
    current = initial
    for n in range(1, cfg.max_iters + 1):
        sp.update(current)
        tic = time.perf_counter()
        try:
            current, t_star = solve_subproblem(sp, cfg)
        except SolverFailure as exc:
            log.warning("SCA aborted at iteration %d: %s", n, exc)
            trace.status = f"solver_failure: {exc}"
            break
        trace.solve_seconds.append(time.perf_counter() - tic)
        if not cfg.enable_an:
            current = PowerAllocation(current.p, np.zeros_like(current.p_v))
        trace.t_values.append(t_star)
        trace.allocations.append(current)
        trace.true_min_gap.append(_objective_value(current, stats, net, cfg))
        trace.iterations_used = n
        if abs(trace.t_values[-1] - trace.t_values[-2]) <= cfg.epsilon:
            trace.converged = True
            trace.status = "converged"
            break
    else:
        trace.status = "max_iters"
    trace.final_report = secrecy_report(trace.final_allocation, stats, net)
    return trace
