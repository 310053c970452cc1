"""Game instances, first-order oracles, the followers' game operator and
the epsilon-stationarity certificate.

Vectors are flat ``numpy`` arrays.  The followers' joint strategy ``y`` is a
single vector of length ``N = sum(n_i)``; follower ``i`` owns the slice
``problem.blocks[i]``.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import BudgetExceeded, ShapeError, require_finite

Vector = np.ndarray
ScalarFn = Callable[[Vector, Vector], float]
VectorFn = Callable[[Vector, Vector], Vector]

#: hard cap on the best-response descent used by follower_suboptimality
SUBOPT_MAX_ITERS = 10**6


@dataclass(frozen=True)
class SmoothnessConstants:
    """Declared regularity constants of a game instance.

    ``ell_f0`` bounds both ``||grad_x f||`` and every ``||grad_{y_i} f||`` over
    the domain; ``ell_g0`` bounds every ``||grad_x g_i||``.  Either may be
    ``inf`` for unbounded domains.
    """

    mu_g: float
    ell_f0: float
    ell_f1: float
    ell_g0: float
    ell_g1: float
    ell_g2: float = 0.0

    def __post_init__(self):
        for name in ("mu_g", "ell_f0", "ell_f1", "ell_g0", "ell_g1"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if not self.ell_g2 >= 0:
            raise ValueError(f"ell_g2 must be >= 0, got {self.ell_g2}")
        if self.ell_g1 < self.mu_g:
            # impossible for true constants; allowed so misdeclared sets can be audited
            warnings.warn(f"ell_g1={self.ell_g1} < mu_g={self.mu_g}: constants are inconsistent",
                          stacklevel=3)

    def replace(self, **changes) -> "SmoothnessConstants":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in
                ("mu_g", "ell_f0", "ell_f1", "ell_g0", "ell_g1", "ell_g2")}


@dataclass(frozen=True)
class LeaderObjective:
    value: ScalarFn
    grad_x: VectorFn
    grad_y: VectorFn


@dataclass(frozen=True)
class FollowerCost:
    index: int
    value: ScalarFn
    grad_x: VectorFn
    grad_own: VectorFn


@dataclass(frozen=True, eq=False)
class Box:
    lower: Vector
    upper: Vector

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("box bounds must be 1-D arrays of equal length")
        if not np.all(lo < hi):
            raise ValueError("box requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def project(self, v: Vector) -> Vector:
        return np.clip(v, self.lower, self.upper)

    def sub(self, sl: slice) -> "Box":
        return Box(self.lower[sl], self.upper[sl])

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))


@dataclass(frozen=True, eq=False)
class StackelbergProblem:
    """One leader with objective ``f`` and ``k`` followers with costs ``g_i``."""

    leader: LeaderObjective
    followers: tuple
    n0: int
    block_sizes: tuple
    constants: SmoothnessConstants
    x_bounds: Optional[Box] = None
    y_bounds: Optional[Box] = None
    name: str = ""
    blocks: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "followers", tuple(self.followers))
        object.__setattr__(self, "block_sizes", tuple(int(n) for n in self.block_sizes))
        if len(self.followers) < 1:
            raise ValueError("need at least one follower")
        if len(self.followers) != len(self.block_sizes):
            raise ShapeError("one block size per follower required")
        if self.n0 < 1 or any(n < 1 for n in self.block_sizes):
            raise ShapeError("dimensions must be positive")
        for i, fol in enumerate(self.followers):
            if fol.index != i:
                raise ValueError(f"follower at position {i} has index {fol.index}")
        offsets = np.concatenate([[0], np.cumsum(self.block_sizes)])
        blocks = tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:]))
        object.__setattr__(self, "blocks", blocks)
        if self.x_bounds is not None and self.x_bounds.lower.shape != (self.n0,):
            raise ShapeError("x_bounds dimension mismatch")
        if self.y_bounds is not None and self.y_bounds.lower.shape != (self.N,):
            raise ShapeError("y_bounds dimension mismatch")

    @property
    def k(self) -> int:
        return len(self.followers)

    @property
    def N(self) -> int:
        return int(sum(self.block_sizes))

    def check_x(self, x) -> Vector:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n0,):
            raise ShapeError(f"x has shape {x.shape}, expected ({self.n0},)")
        return x

    def check_y(self, y) -> Vector:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.N,):
            raise ShapeError(f"y has shape {y.shape}, expected ({self.N},)")
        return y

    def project_x(self, x: Vector) -> Vector:
        return x if self.x_bounds is None else self.x_bounds.project(x)

    def project_y(self, y: Vector) -> Vector:
        return y if self.y_bounds is None else self.y_bounds.project(y)

    def project_block(self, i: int, yi: Vector) -> Vector:
        if self.y_bounds is None:
            return yi
        return self.y_bounds.sub(self.blocks[i]).project(yi)

    def splice(self, z: Vector, i: int, yi: Vector) -> Vector:
        """Return ``(yi, z_{-i})``: a copy of ``z`` with block ``i`` replaced."""
        w = np.array(z, dtype=float, copy=True)
        w[self.blocks[i]] = yi
        return w

    def with_constants(self, constants: SmoothnessConstants) -> "StackelbergProblem":
        return replace(self, constants=constants)


@dataclass(frozen=True, eq=False)
class JointPoint:
    x: Vector
    y: Vector
    block_sizes: tuple

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or y.size != sum(self.block_sizes):
            raise ShapeError("joint point dimensions inconsistent with block sizes")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("joint point entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "block_sizes", tuple(self.block_sizes))

    def block(self, i: int) -> Vector:
        start = sum(self.block_sizes[:i])
        return self.y[start:start + self.block_sizes[i]]


# --------------------------------------------------------------------------
# operator and monotonicity

def game_operator(problem: StackelbergProblem, x, y) -> Vector:
    """Stack each follower's own-block gradient ``grad_{y_i} g_i(x, y)``."""
    x = problem.check_x(x)
    y = problem.check_y(y)
    parts = []
    for fol, sl in zip(problem.followers, problem.blocks):
        g = np.asarray(fol.grad_own(x, y), dtype=float)
        if g.shape != (sl.stop - sl.start,):
            raise ShapeError(f"follower {fol.index} grad_own returned shape {g.shape}")
        parts.append(g)
    return np.concatenate(parts)


@dataclass(frozen=True)
class MonotonicityReport:
    min_ratio: float
    passed: bool
    mu_g: float
    samples: int


def _sample_box(rng, box: Optional[Box], dim: int, radius: float) -> Vector:
    if box is not None and box.bounded:
        return rng.uniform(box.lower, box.upper)
    return rng.uniform(-radius, radius, size=dim)


def check_strong_monotonicity(problem: StackelbergProblem, sample_count: int,
                              rng_seed: int, radius: Optional[float] = None,
                              x=None) -> MonotonicityReport:
    """Sampled lower estimate of the monotonicity modulus of the game operator.

    For each sample a leader strategy (``x`` if given) and two follower
    profiles are drawn from the domain, or from a cube of half-width
    ``radius`` on unbounded domains.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    y_unbounded = problem.y_bounds is None or not problem.y_bounds.bounded
    x_unbounded = x is None and (problem.x_bounds is None or not problem.x_bounds.bounded)
    if radius is None and (y_unbounded or x_unbounded):
        raise ValueError("unbounded domain: supply a sampling radius")
    rng = np.random.default_rng(rng_seed)
    min_ratio = math.inf
    for _ in range(sample_count):
        xs = problem.check_x(x) if x is not None else _sample_box(rng, problem.x_bounds, problem.n0, radius)
        while True:
            y1 = _sample_box(rng, problem.y_bounds, problem.N, radius)
            y2 = _sample_box(rng, problem.y_bounds, problem.N, radius)
            d = y2 - y1
            dd = float(d @ d)
            if dd > 1e-24:
                break
        ratio = float((game_operator(problem, xs, y2) - game_operator(problem, xs, y1)) @ d) / dd
        min_ratio = min(min_ratio, ratio)
    mu = problem.constants.mu_g
    return MonotonicityReport(min_ratio, min_ratio >= mu - 1e-9, mu, sample_count)


# --------------------------------------------------------------------------
# follower suboptimality and the stationarity certificate

def _best_response_gaps(problem: StackelbergProblem, x: Vector, y: Vector,
                        inner_tol: float, max_iter: int = SUBOPT_MAX_ITERS):
    """Return (gaps, gradient evaluations) for unilateral deviations."""
    step = 1.0 / problem.constants.ell_g1
    gaps = np.empty(problem.k)
    evals = 0
    for fol, sl in zip(problem.followers, problem.blocks):
        i = fol.index
        yi = y[sl].copy()
        w = y.copy()
        for it in range(max_iter + 1):
            w[sl] = yi
            g = require_finite(fol.grad_own(x, w), f"gradient of follower {i}", iterate=w)
            evals += 1
            trial = problem.project_block(i, yi - step * g)
            # projected-gradient mapping; equals g on unconstrained problems
            if np.linalg.norm(yi - trial) / step <= inner_tol:
                break
            if it == max_iter:
                raise BudgetExceeded(
                    f"best response of follower {i} did not reach tol {inner_tol} "
                    f"within {max_iter} iterations")
            yi = trial
        w[sl] = yi
        gaps[i] = float(fol.value(x, y)) - float(fol.value(x, w))
    return gaps, evals


def follower_suboptimality(problem: StackelbergProblem, x, y, inner_tol: float,
                           max_iter: int = SUBOPT_MAX_ITERS) -> Vector:
    """Per-follower gain from the best unilateral deviation at ``(x, y)``.

    The deviation is found by projected gradient descent on the follower's
    own block (step ``1/ell_g1``, warm-started at ``y_i``), so the returned
    gaps are never negative.
    """
    if not inner_tol > 0:
        raise ValueError("inner_tol must be > 0")
    gaps, _ = _best_response_gaps(problem, problem.check_x(x), problem.check_y(y),
                                  inner_tol, max_iter)
    return gaps


@dataclass(frozen=True)
class StationarityCertificate:
    passed: bool
    eps: float
    gap_max: float
    gaps: tuple
    grad_norm: float
    grad_source: str  # "true" or "surrogate"

    def __bool__(self):
        return self.passed


def check_epsilon_stationary(problem: StackelbergProblem, x, y, eps: float,
                             true_grad=None, surrogate_grad=None,
                             inner_tol: float = 1e-8) -> StationarityCertificate:
    """Certify both conditions of an eps-stationary Stackelberg pair.

    The leader condition uses ``true_grad`` (the hypergradient at ``x``) when
    supplied.  Otherwise ``surrogate_grad`` stands in, and if that is also
    missing the partial gradient ``grad_x f(x, y)`` is used; both fallbacks are
    flagged ``grad_source="surrogate"``.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    x = problem.check_x(x)
    y = problem.check_y(y)
    if true_grad is not None:
        grad, source = np.atleast_1d(np.asarray(true_grad, dtype=float)), "true"
    elif surrogate_grad is not None:
        grad, source = np.atleast_1d(np.asarray(surrogate_grad, dtype=float)), "surrogate"
    else:
        grad, source = np.asarray(problem.leader.grad_x(x, y), dtype=float), "surrogate"
    gaps = follower_suboptimality(problem, x, y, inner_tol)
    gap_max = float(np.max(gaps))
    grad_norm = float(np.linalg.norm(grad))
    return StationarityCertificate(
        passed=bool(gap_max <= eps and grad_norm <= eps),
        eps=eps, gap_max=gap_max, gaps=tuple(float(g) for g in gaps),
        grad_norm=grad_norm, grad_source=source)


# --------------------------------------------------------------------------
# evaluation accounting

def count_evaluations(problem: StackelbergProblem):
    """Wrap every gradient oracle of ``problem`` with a shared call counter.

    Returns ``(wrapped_problem, counter)``; ``counter["grad"]`` is the total
    number of gradient-oracle calls, with per-oracle keys alongside.
    """
    counter: Counter = Counter()

    def wrap(fn, key):
        def inner(x, y):
            counter["grad"] += 1
            counter[key] += 1
            return fn(x, y)
        return inner

    leader = LeaderObjective(problem.leader.value,
                             wrap(problem.leader.grad_x, "leader.grad_x"),
                             wrap(problem.leader.grad_y, "leader.grad_y"))
    followers = [FollowerCost(f.index, f.value,
                              wrap(f.grad_x, f"g{f.index}.grad_x"),
                              wrap(f.grad_own, f"g{f.index}.grad_own"))
                 for f in problem.followers]
    return replace(problem, leader=leader, followers=tuple(followers)), counter
