"""The penalized surrogate Lagrangian and its first-order minimizer.

For a penalty ``lam`` and an approximate followers' equilibrium ``z``::

    L(x, y, z) = f(x, y) + lam * sum_i [ g_i(x, y_i, z_{-i}) - g_i(x, z) ]

All followers share the same multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SmoothnessConstants, StackelbergProblem
from .errors import ConvexityViolation, ShapeError, require_finite


def lambda_threshold(constants: SmoothnessConstants) -> float:
    """Smallest penalty for which the Lagrangian is strongly convex in ``y``."""
    return 2.0 * constants.ell_f1 / constants.mu_g


@dataclass(frozen=True)
class PenaltyState:
    lam: float
    mu_l: float
    ell_l: float

    @classmethod
    def at(cls, problem: StackelbergProblem, lam: float) -> "PenaltyState":
        c = problem.constants
        if lam < lambda_threshold(c) * (1 - 1e-12):
            raise ConvexityViolation(
                f"lambda={lam} below strong-convexity threshold {lambda_threshold(c)}")
        return cls(lam, c.mu_g * lam / 2.0, c.ell_f1 + problem.k * lam * c.ell_g1)

    @property
    def contraction(self) -> float:
        """Per-step distance contraction of GD with step ``2/(mu_l + ell_l)``."""
        return 1.0 - 2.0 * self.mu_l / (self.mu_l + self.ell_l)


def c_lambda(constants: SmoothnessConstants, k: int) -> float:
    """Constant with ``||grad F - grad L*_lam|| <= k * c_lambda / lam``.

    Collects the two terms of the gradient-approximation bound; the second
    term's explicit ``lam`` factors cancel.
    """
    c = constants
    r = 2.0 * c.ell_f0 / c.mu_g
    first = (c.ell_f1 + c.ell_g1 * c.ell_f1 * k / c.mu_g) * r
    second = (c.ell_g1 + 2.0 * c.ell_g1 ** 2 / c.mu_g) * r ** 2
    return first + second


def gradient_gap_bound(constants: SmoothnessConstants, k: int, lam: float) -> float:
    """Right-hand side of the bound on ``||grad F(x) - grad L*_lam(x)||``."""
    return k * c_lambda(constants, k) / lam


def leader_smoothness(constants: SmoothnessConstants) -> float:
    """Smoothness constant of ``F(x) = f(x, y*(x))`` implied by the game constants."""
    c = constants
    curv = c.ell_f0 * c.ell_g2 / c.mu_g if c.ell_g2 > 0 else 0.0
    return ((c.ell_f1 + curv + c.ell_g1 * c.ell_f1 / c.mu_g)
            * (1.0 + c.ell_g1 / c.mu_g))


def _check(problem, lam, x, y, z):
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    return problem.check_x(x), problem.check_y(y), problem.check_y(z)


def surrogate_value(problem: StackelbergProblem, lam: float, x, y, z) -> float:
    x, y, z = _check(problem, lam, x, y, z)
    penalty = 0.0
    for fol in problem.followers:
        penalty += fol.value(x, problem.splice(z, fol.index, y[problem.blocks[fol.index]]))
        penalty -= fol.value(x, z)
    return float(problem.leader.value(x, y)) + lam * penalty


def surrogate_grad_y(problem: StackelbergProblem, lam: float, x, y, z) -> np.ndarray:
    """Block ``i``: ``grad_{y_i} f(x, y) + lam * grad_{y_i} g_i(x, y_i, z_{-i})``."""
    x, y, z = _check(problem, lam, x, y, z)
    out = np.array(problem.leader.grad_y(x, y), dtype=float)
    if out.shape != (problem.N,):
        raise ShapeError("leader grad_y returned wrong shape")
    for fol, sl in zip(problem.followers, problem.blocks):
        out[sl] += lam * np.asarray(fol.grad_own(x, problem.splice(z, fol.index, y[sl])))
    return out


def surrogate_grad_x(problem: StackelbergProblem, lam: float, x, y, z) -> np.ndarray:
    """``grad_x f(x, y) + lam * sum_i [grad_x g_i(x, y_i, z_{-i}) - grad_x g_i(x, z)]``."""
    x, y, z = _check(problem, lam, x, y, z)
    out = np.array(problem.leader.grad_x(x, y), dtype=float)
    for fol, sl in zip(problem.followers, problem.blocks):
        diff = (np.asarray(fol.grad_x(x, problem.splice(z, fol.index, y[sl])))
                - np.asarray(fol.grad_x(x, z)))
        out += lam * diff
    return out


@dataclass(frozen=True)
class SurrogateMinResult:
    y: np.ndarray
    iters: int
    grad_evals: int
    final_grad_norm: float


def minimize_surrogate_in_y(problem: StackelbergProblem, lam: float, x, z, y_init,
                            budget: int, tol: float) -> SurrogateMinResult:
    """Projected GD on ``y -> L(x, y, z)`` with step ``2/(mu_l + ell_l)``.

    Stops after ``budget`` steps or once the (projected) gradient norm is at
    most ``tol``.  Each gradient costs ``k + 1`` oracle calls, so
    ``grad_evals = (k + 1) * (iters + 1)``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    state = PenaltyState.at(problem, lam)
    x = problem.check_x(x)
    z = problem.check_y(z)
    y = problem.check_y(y_init).copy()
    step = 2.0 / (state.mu_l + state.ell_l)
    per_grad = problem.k + 1
    iters = 0
    evals = 0
    while True:
        g = require_finite(surrogate_grad_y(problem, lam, x, y, z), "surrogate gradient", iterate=y)
        evals += per_grad
        trial = problem.project_y(y - step * g)
        gnorm = float(np.linalg.norm(y - trial)) / step
        if gnorm <= tol or iters >= budget:
            return SurrogateMinResult(y, iters, evals, gnorm)
        y = trial
        iters += 1
