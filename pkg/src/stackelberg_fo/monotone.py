"""Last-iterate solvers for the followers' strongly monotone game at a fixed
leader strategy."""

from __future__ import annotations

import math

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import StackelbergProblem, game_operator
from .errors import require_finite

METHODS = ("extragradient", "simultaneous-gd")


@dataclass(frozen=True)
class MonotoneSolveConfig:
    """``step=None`` resolves to ``1/(2 ell_g1)`` against the problem."""

    method: str = "extragradient"
    step: Optional[float] = None
    max_iters: int = 1000
    tol: float = 1e-10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be > 0")

    def resolved_step(self, problem: StackelbergProblem) -> float:
        ell = problem.constants.ell_g1
        step = 1.0 / (2.0 * ell) if self.step is None else float(self.step)
        if step > 1.0 / ell * (1 + 1e-12):
            raise ValueError(f"step {step} exceeds 1/ell_g1 = {1.0 / ell}")
        return step


@dataclass(frozen=True)
class MonotoneSolveResult:
    z: np.ndarray
    iters_used: int
    final_operator_norm: float
    grad_evals: int


def _operator(problem, x, z):
    return require_finite(game_operator(problem, x, z), "game operator", iterate=z)


def extragradient_step(problem: StackelbergProblem, x, z, step: float) -> np.ndarray:
    """``z - s V(x, z - s V(x, z))``, each half-step projected onto the box."""
    if not step > 0:
        raise ValueError("step must be > 0")
    x = problem.check_x(x)
    z = problem.check_y(z)
    mid = problem.project_y(z - step * _operator(problem, x, z))
    return problem.project_y(z - step * _operator(problem, x, mid))


def solve_followers_game(problem: StackelbergProblem, x, z_init,
                         config: MonotoneSolveConfig) -> MonotoneSolveResult:
    """Run the configured method until ``||V(x, z)|| <= tol`` or ``max_iters``.

    Every iteration starts by evaluating ``V`` at the current iterate; that
    evaluation doubles as the stopping probe and, for extragradient, as the
    first half-step.  Hence ``grad_evals = k * (2 * iters + 1)`` for
    extragradient and ``k * (iters + 1)`` for simultaneous GD.
    """
    x = problem.check_x(x)
    z = problem.check_y(z_init).copy()
    step = config.resolved_step(problem)
    k = problem.k
    v = _operator(problem, x, z)
    evals = k
    iters = 0
    while iters < config.max_iters and np.linalg.norm(v) > config.tol:
        if config.method == "extragradient":
            mid = problem.project_y(z - step * v)
            z = problem.project_y(z - step * _operator(problem, x, mid))
            evals += k
        else:
            z = problem.project_y(z - step * v)
        iters += 1
        v = _operator(problem, x, z)
        evals += k
    return MonotoneSolveResult(z, iters, float(np.linalg.norm(v)), evals)


def contraction_factor(problem: StackelbergProblem, config: MonotoneSolveConfig) -> float:
    """Guaranteed per-iteration factor on ``||z - z*||``.

    Extragradient with ``s <= 1/(2 ell)`` satisfies
    ``|z+ - z*|^2 <= |z - z*|^2 - 2 s mu |mid - z*|^2 - (1 - s^2 ell^2) |mid - z|^2``;
    splitting ``|z - z*|^2 <= (7/3)|mid - z*|^2 + (7/4)|mid - z|^2`` leaves
    the factor ``sqrt(1 - 6 s mu / 7)``.  Plain GD gives
    ``sqrt(1 - 2 s mu + s^2 ell^2)``, which may exceed 1.
    """
    c = problem.constants
    s = config.resolved_step(problem)
    if config.method == "extragradient":
        if s > 1.0 / (2.0 * c.ell_g1) * (1 + 1e-12):
            raise ValueError("extragradient factor needs step <= 1/(2 ell_g1)")
        return math.sqrt(1.0 - 6.0 * s * c.mu_g / 7.0)
    return math.sqrt(max(0.0, 1.0 - 2.0 * s * c.mu_g + (s * c.ell_g1) ** 2))
