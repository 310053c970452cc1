"""Outer loop: penalty schedule, inner budgets, leader updates, telemetry and
stopping, plus checks that replay a recorded trace against exact quantities.

Each outer iteration ``t = 1, 2, ...``:

1. ``z_{t+1}``: followers' game at ``x_t`` (warm start ``z_t``, budget ``M_z``);
2. ``y_{t+1}``: surrogate minimization in ``y`` (warm start ``y_t``, budget ``M_y``);
3. the pair ``(x_t, z_{t+1})`` is certified;
4. unless certified, ``x_{t+1} = x_t - eta * grad_x L(x_t, y_{t+1}, z_{t+1})``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .core import JointPoint, StackelbergProblem, _best_response_gaps
from .errors import ConfigError, NumericFailure, OracleUnavailable, require_finite
from .lagrangian import (PenaltyState, c_lambda, lambda_threshold, leader_smoothness,
                         minimize_surrogate_in_y, surrogate_grad_x)
from .monotone import MonotoneSolveConfig, solve_followers_game

STATUSES = ("converged", "budget_exhausted", "numeric_failure")

# -- schedule -----------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleParams:
    """Schedule and budget parameters.

    ``eta``, ``lambda_floor`` left as ``None`` resolve against the problem:
    ``eta = 1/ell_F1`` and ``lambda_floor = max(1, 2 ell_f1 / mu_g)``.
    """

    rho: float = 1.5
    eps_prime: float = 0.1
    eta: Optional[float] = None
    lambda_floor: Optional[float] = None
    lambda_cap: float = 1e8
    T_max: int = 10_000
    target_eps: float = 1e-2
    c_y: float = 1.0
    c_z: float = 1.0
    C_z: float = 1.0
    tol_y: float = 1e-10
    tol_z: float = 1e-10
    gap_tol: float = 1e-8
    method: str = "extragradient"
    z_step: Optional[float] = None

    def __post_init__(self):
        checks = [
            (self.rho > 1, "rho must be > 1"),
            (self.eps_prime > 0, "eps_prime must be > 0"),
            (self.eta is None or self.eta > 0, "eta must be > 0"),
            (self.lambda_floor is None or self.lambda_floor > 0, "lambda_floor must be > 0"),
            (self.lambda_cap > 0, "lambda_cap must be > 0"),
            (int(self.T_max) == self.T_max and self.T_max >= 1, "T_max must be an integer >= 1"),
            (self.target_eps > 0, "target_eps must be > 0"),
            (self.c_y > 0 and self.c_z > 0, "budget multipliers must be > 0"),
            (self.C_z >= 0, "C_z must be >= 0"),
            (self.tol_y >= 0 and self.tol_z >= 0, "inner tolerances must be >= 0"),
            (self.gap_tol > 0, "gap_tol must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def alpha(self) -> float:
        """Complexity exponent implied by ``rho - 1 = alpha/2 - eps_prime``."""
        return 2.0 * (self.rho - 1.0 + self.eps_prime)

    def resolve(self, problem: StackelbergProblem) -> "ScheduleParams":
        c = problem.constants
        eta = self.eta if self.eta is not None else 1.0 / leader_smoothness(c)
        floor = self.lambda_floor
        if floor is None:
            floor = max(1.0, lambda_threshold(c))
        return replace(self, eta=float(eta), lambda_floor=float(floor))


@dataclass(frozen=True)
class LambdaStep:
    lam: float
    delta: float


def schedule_lambda(t: int, params: ScheduleParams) -> LambdaStep:
    """``lam_t = min(cap, max(floor, t^rho))`` and ``delta_t = t^rho - (t-1)^rho``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    floor = 1.0 if params.lambda_floor is None else params.lambda_floor
    raw = float(t) ** params.rho
    lam = min(params.lambda_cap, max(floor, raw))
    return LambdaStep(lam, raw - float(t - 1) ** params.rho)


def _ceil(v: float) -> int:
    # absorb rounding noise in products that are integers in exact arithmetic
    return max(1, math.ceil(v * (1.0 - 1e-12)))


def budget_My(t: int, k: int, mu_l: float, ell_l: float, params: ScheduleParams) -> int:
    """GD steps for the surrogate in ``y`` at iteration ``t`` (natural logs)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    v = params.c_y * (ell_l / mu_l + 1.0) * (
        (3.0 + params.eps_prime) / 2.0 * math.log(t) + math.log(k))
    return _ceil(v)


def budget_Mz(t: int, k: int, params: ScheduleParams, C_z: float, mu_g: float) -> int:
    """Extragradient steps for the followers' game at iteration ``t``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    v = params.c_z * C_z * k * float(t) ** (params.rho + params.eps_prime + 1.0) / mu_g
    return _ceil(v)


# -- records ------------------------------------------------------------------

CSV_FIELDS = ("t", "lambda", "delta", "eta", "M_y", "M_z", "grad_evals_cum",
              "surrogate_grad_norm", "true_grad_norm", "follower_gap_max",
              "E1", "E2", "E3", "err_sq", "F_value")


@dataclass
class IterationRecord:
    """One outer iteration.  ``M_y`` and ``M_z`` are the steps actually used.

    Fields marked ``compare=False`` live only in memory and are not written to
    the CSV trace.
    """

    t: int
    lam: float
    delta: float
    eta: float
    M_y: int
    M_z: int
    grad_evals_cum: int
    surrogate_grad_norm: float
    true_grad_norm: Optional[float]
    follower_gap_max: float
    E1: Optional[float]
    E2: Optional[float]
    E3: Optional[float]
    err_sq: Optional[float]
    F_value: Optional[float]
    x: tuple
    y: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    z: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    surrogate_grad: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    z_operator_norm: Optional[float] = field(default=None, compare=False)
    M_y_budget: Optional[int] = field(default=None, compare=False)
    M_z_budget: Optional[int] = field(default=None, compare=False)
    cert_evals: int = field(default=0, compare=False)

    @property
    def grad_norm(self) -> float:
        """True gradient norm when recorded, else the surrogate norm."""
        return self.true_grad_norm if self.true_grad_norm is not None else self.surrogate_grad_norm

    @property
    def x_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


@dataclass
class SolveOutcome:
    status: str
    final: Optional[JointPoint]
    best_iterate: Optional[IterationRecord]
    trace: List[IterationRecord]
    params: ScheduleParams
    wall_time: float = 0.0
    error: Optional[BaseException] = None

    @property
    def total_grad_evals(self) -> int:
        return self.trace[-1].grad_evals_cum if self.trace else 0

    @property
    def total_cert_evals(self) -> int:
        return sum(r.cert_evals for r in self.trace)


def best_so_far(trace) -> List[float]:
    """Running minimum of the recorded gradient norm."""
    return list(np.minimum.accumulate([r.grad_norm for r in trace])) if trace else []


# -- driver -------------------------------------------------------------------

def run(problem: StackelbergProblem, params: ScheduleParams, oracle=None,
        trace_sink: Optional[Callable[[IterationRecord], None]] = None,
        x0=None, y0=None, z0=None) -> SolveOutcome:
    """Run the penalty method until the pair ``(x_t, z_{t+1})`` is
    ``target_eps``-stationary or ``T_max`` iterations elapse.

    Parameters
    ----------
    oracle : optional
        Exact ground truth with ``F``, ``true_gradient``,
        ``followers_equilibrium`` and ``lagrangian_minimizer``.  When given,
        certification uses the true gradient and the error terms are
        recorded.  Without it the surrogate gradient stands in.
    trace_sink : callable, optional
        Receives every record as soon as it is produced.
    x0, y0, z0 : array_like, optional
        Initial points; zeros (projected) by default.
    """
    params = params.resolve(problem)
    c = problem.constants
    k = problem.k
    x = problem.project_x(problem.check_x(np.zeros(problem.n0) if x0 is None else x0).copy())
    y = problem.project_y(problem.check_y(np.zeros(problem.N) if y0 is None else y0).copy())
    z = problem.project_y(problem.check_y(np.zeros(problem.N) if z0 is None else z0).copy())
    C_lam = c_lambda(c, k) if oracle is not None else None
    trace: List[IterationRecord] = []
    evals = 0
    status = "budget_exhausted"
    error = None
    start = time.perf_counter()
    try:
        for t in range(1, int(params.T_max) + 1):
            step = schedule_lambda(t, params)
            lam = step.lam
            state = PenaltyState.at(problem, lam)
            Mz_budget = budget_Mz(t, k, params, params.C_z, c.mu_g)
            zres = solve_followers_game(
                problem, x, z, MonotoneSolveConfig(params.method, params.z_step, Mz_budget, params.tol_z))
            z = zres.z
            My_budget = budget_My(t, k, state.mu_l, state.ell_l, params)
            yres = minimize_surrogate_in_y(problem, lam, x, z, y, My_budget, params.tol_y)
            y = yres.y
            g = require_finite(surrogate_grad_x(problem, lam, x, y, z), "leader gradient", iterate=x)
            evals += zres.grad_evals + yres.grad_evals + 2 * k + 1
            gaps, cert_evals = _best_response_gaps(problem, x, z, params.gap_tol)
            gap_max = float(np.max(gaps))
            gnorm = float(np.linalg.norm(g))
            true_norm = F_val = E1 = E2 = E3 = err_sq = None
            if oracle is not None:
                gF = np.atleast_1d(oracle.true_gradient(x))
                true_norm = float(np.linalg.norm(gF))
                F_val = float(oracle.F(x))
                E1, E2, E3, err_sq = _error_terms(oracle, c, k, lam, x, y, z, g, gF, C_lam)
            rec = IterationRecord(
                t=t, lam=lam, delta=step.delta, eta=params.eta, M_y=yres.iters, M_z=zres.iters_used,
                grad_evals_cum=evals, surrogate_grad_norm=gnorm, true_grad_norm=true_norm,
                follower_gap_max=gap_max, E1=E1, E2=E2, E3=E3, err_sq=err_sq, F_value=F_val,
                x=tuple(float(v) for v in x), y=y.copy(), z=z.copy(), surrogate_grad=g,
                z_operator_norm=zres.final_operator_norm, M_y_budget=My_budget,
                M_z_budget=Mz_budget, cert_evals=cert_evals)
            trace.append(rec)
            if trace_sink is not None:
                trace_sink(rec)
            if gap_max <= params.target_eps and rec.grad_norm <= params.target_eps:
                status = "converged"
                break
            x = require_finite(problem.project_x(x - params.eta * g), "leader iterate", iterate=x)
    except NumericFailure as exc:
        status, error = "numeric_failure", exc
    wall = time.perf_counter() - start
    final = JointPoint(np.array(trace[-1].x), trace[-1].z, problem.block_sizes) if trace else None
    best = min(trace, key=lambda r: r.grad_norm) if trace else None
    return SolveOutcome(status, final, best, trace, params, wall, error)


def _error_terms(oracle, constants, k, lam, x, y, z, g, gF, C_lam):
    ylam = oracle.lagrangian_minimizer(lam, x)
    ystar = oracle.followers_equilibrium(x)
    kl2 = (k * lam) ** 2
    E1 = (constants.ell_f1 ** 2 + 5.0 * kl2) * float(np.sum((y - ylam) ** 2))
    E2 = 2.0 * kl2 * float(np.sum((z - ystar) ** 2))
    E3 = (k * C_lam / lam) ** 2
    err_sq = 0.25 * float(np.sum((g - gF) ** 2))
    return E1, E2, E3, err_sq


# -- trace checks -------------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    name: str
    value: float          # max violation, or max ratio for ratio checks
    passed: bool
    kind: str = "violation"
    detail: str = ""


def _require_oracle(oracle, what):
    if oracle is None:
        raise OracleUnavailable(f"{what} requires an exact oracle")


def descent_check(trace, eta: float, oracle, tol: float = 1e-9) -> CheckReport:
    """Per-step sufficient decrease and its summed form.

    Per step: ``F(x_{t+1}) - F(x_t) <= -eta/2 |grad F|^2 + eta/2 |grad F - g_t|^2``.
    Summed: ``sum eta/4 |grad F(x_t)|^2 <= F(x_1) - F* + eta * sum err_sq``.
    ``g_t`` is the recorded leader gradient, or ``(x_t - x_{t+1}) / eta``
    when only coordinates survive (e.g. a parsed CSV).
    """
    _require_oracle(oracle, "descent_check")
    worst = -math.inf
    lhs_sum = 0.0
    err_sum = 0.0
    for cur, nxt in zip(trace[:-1], trace[1:]):
        x0, x1 = cur.x_array, nxt.x_array
        gF = np.atleast_1d(oracle.true_gradient(x0))
        g = cur.surrogate_grad if cur.surrogate_grad is not None else (x0 - x1) / eta
        dec = float(oracle.F(x1)) - float(oracle.F(x0))
        rhs = -0.5 * eta * float(gF @ gF) + 0.5 * eta * float(np.sum((gF - g) ** 2))
        worst = max(worst, dec - rhs)
        lhs_sum += 0.25 * eta * float(gF @ gF)
        err_sum += 0.25 * float(np.sum((gF - g) ** 2))
    summed = 0.0
    if len(trace) > 1:
        F_star = float(oracle.F_star())
        summed = lhs_sum - (float(oracle.F(trace[0].x_array)) - F_star + eta * err_sum)
        worst = max(worst, summed)
    if worst == -math.inf:
        worst = 0.0
    return CheckReport("descent", worst, bool(worst <= tol),
                       detail=f"summed_violation={summed!r}")


def error_decomposition_check(trace, oracle, problem: StackelbergProblem,
                              exact_inner: bool = False, tol: float = 1e-9) -> CheckReport:
    """``err_sq <= E1 + E2 + E3`` per record; E-terms are written back.

    With ``exact_inner`` the inner iterates are replaced by ``y*_lam(x_t)``
    and ``y*(x_t)``, so E1 = E2 = 0 and the bound reduces to E3.
    """
    _require_oracle(oracle, "error_decomposition_check")
    c = problem.constants
    k = problem.k
    C_lam = c_lambda(c, k)
    worst = -math.inf
    for rec in trace:
        x = rec.x_array
        if exact_inner:
            y = oracle.lagrangian_minimizer(rec.lam, x)
            z = oracle.followers_equilibrium(x)
        else:
            if rec.y is None or rec.z is None:
                raise ValueError("records lack inner iterates; use an in-memory trace")
            y, z = rec.y, rec.z
        g = surrogate_grad_x(problem, rec.lam, x, y, z)
        gF = np.atleast_1d(oracle.true_gradient(x))
        E1, E2, E3, err_sq = _error_terms(oracle, c, k, rec.lam, x, y, z, g, gF, C_lam)
        if not exact_inner:
            rec.E1, rec.E2, rec.E3, rec.err_sq = E1, E2, E3, err_sq
        worst = max(worst, err_sq - (E1 + E2 + E3))
    worst = 0.0 if worst == -math.inf else worst
    name = "error_decomposition_exact_inner" if exact_inner else "error_decomposition"
    return CheckReport(name, worst, bool(worst <= tol))


def leader_step_check(trace, problem: StackelbergProblem) -> CheckReport:
    """``|x_{t+1} - x_t| <= eta (ell_f0 + 2 k ell_g0)``; reports the max ratio."""
    c = problem.constants
    worst = 0.0
    for cur, nxt in zip(trace[:-1], trace[1:]):
        bound = cur.eta * (c.ell_f0 + 2 * problem.k * c.ell_g0)
        step = float(np.linalg.norm(nxt.x_array - cur.x_array))
        worst = max(worst, step / bound if bound > 0 else (0.0 if step == 0 else math.inf))
    return CheckReport("leader_step", worst, bool(worst <= 1 + 1e-9), kind="ratio")


def triangle_check(trace, oracle, problem: StackelbergProblem) -> CheckReport:
    """``|y_{t+1} - z_{t+1}| <= |y_{t+1} - y*(x_t)| + |V(x_t, z_{t+1})| / mu_g``."""
    _require_oracle(oracle, "triangle_check")
    worst = 0.0
    for rec in trace:
        if rec.y is None or rec.z is None or rec.z_operator_norm is None:
            raise ValueError("records lack inner iterates; use an in-memory trace")
        ystar = oracle.followers_equilibrium(rec.x_array)
        lhs = float(np.linalg.norm(rec.y - rec.z))
        rhs = float(np.linalg.norm(rec.y - ystar)) + rec.z_operator_norm / problem.constants.mu_g
        worst = max(worst, lhs / rhs if rhs > 0 else (0.0 if lhs <= 1e-14 else math.inf))
    return CheckReport("triangle", worst, bool(worst <= 1 + 1e-9), kind="ratio")


def horizon_check(trace, oracle, problem: StackelbergProblem, eps: float) -> CheckReport:
    """First ``t`` with ``|grad F(x_t)| <= eps`` obeys ``t - 1 <= C_F / eps^2``.

    ``C_F = 4 ell_F1 (F(x_1) - F*) + 4 sum err_sq`` over the recorded steps.
    """
    _require_oracle(oracle, "horizon_check")
    hits = [r.t for r in trace if np.linalg.norm(oracle.true_gradient(r.x_array)) <= eps]
    if not hits:
        return CheckReport("horizon", math.inf, False, kind="ratio", detail="eps never reached")
    t_first = hits[0]
    ell_F1 = leader_smoothness(problem.constants)
    F0 = float(oracle.F(trace[0].x_array))
    err = 0.0
    for rec in trace[:t_first - trace[0].t]:
        if rec.err_sq is not None:
            err += rec.err_sq
        else:
            gF = np.atleast_1d(oracle.true_gradient(rec.x_array))
            err += 0.25 * float(np.sum((gF - rec.surrogate_grad) ** 2))
    C_F = 4.0 * ell_F1 * (F0 - float(oracle.F_star())) + 4.0 * err
    bound = C_F / eps ** 2
    ratio = (t_first - 1) / bound if bound > 0 else (0.0 if t_first == 1 else math.inf)
    return CheckReport("horizon", ratio, bool(ratio <= 1.0), kind="ratio",
                       detail=f"t_first={t_first} C_F={C_F!r}")
