"""Exact ground truth for affine-quadratic games.

This is the only module that factorizes or inverts matrices.  The solver
path (core, monotone, lagrangian, outer) never imports it; tests and the
verification commands use it to check the solver against closed forms.

Follower ``i`` has cost::

    g_i(x, y) = 1/2 y_i' A_ii y_i + y_i' (sum_{j != i} A_ij y_j + B_i x + b_i)
                + 1/2 x' P_i x + p_i' x

so ``grad_{y_i} g_i = sum_j A_ij y_j + B_i x + b_i``; the stacked matrices
are ``H_y = A`` and ``H_x = B``.  The leader has cost::

    f(x, y) = 1/2 x' Qxx x + x' Qxy y + 1/2 y' Qyy y + qx' x + qy' y + f0
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Box, SmoothnessConstants
from .errors import ConvexityViolation, MonotonicityViolation, NoEquilibrium, NumericFailure
from .lagrangian import gradient_gap_bound, lambda_threshold, leader_smoothness

EPS = np.finfo(float).eps


def _sym(M):
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class QuadraticGameSpec:
    A: np.ndarray          # (N, N) stacked [A_ij]
    B: np.ndarray          # (N, n0) stacked B_i
    b: np.ndarray          # (N,)
    block_sizes: tuple
    Qxx: np.ndarray
    Qxy: np.ndarray        # (n0, N)
    Qyy: np.ndarray
    qx: np.ndarray
    qy: np.ndarray
    f0: float = 0.0
    P: Optional[tuple] = None   # per follower (n0, n0)
    p: Optional[tuple] = None   # per follower (n0,)
    mu_g: float = field(init=False)
    blocks: tuple = field(init=False, repr=False)

    def __post_init__(self):
        arr = lambda v: np.atleast_1d(np.asarray(v, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        N = A.shape[0]
        n0 = np.atleast_2d(np.asarray(self.B, dtype=float)).reshape(N, -1).shape[1]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float).reshape(N, n0))
        object.__setattr__(self, "b", arr(self.b).reshape(N))
        object.__setattr__(self, "Qxx", np.asarray(self.Qxx, dtype=float).reshape(n0, n0))
        object.__setattr__(self, "Qxy", np.asarray(self.Qxy, dtype=float).reshape(n0, N))
        object.__setattr__(self, "Qyy", np.asarray(self.Qyy, dtype=float).reshape(N, N))
        object.__setattr__(self, "qx", arr(self.qx).reshape(n0))
        object.__setattr__(self, "qy", arr(self.qy).reshape(N))
        object.__setattr__(self, "block_sizes", tuple(int(n) for n in self.block_sizes))
        k = len(self.block_sizes)
        P = self.P if self.P is not None else [np.zeros((n0, n0))] * k
        p = self.p if self.p is not None else [np.zeros(n0)] * k
        object.__setattr__(self, "P", tuple(np.asarray(m, dtype=float).reshape(n0, n0) for m in P))
        object.__setattr__(self, "p", tuple(arr(v).reshape(n0) for v in p))
        if A.shape != (N, N) or sum(self.block_sizes) != N:
            raise ValueError("A must be square with size sum(block_sizes)")
        offsets = np.concatenate([[0], np.cumsum(self.block_sizes)])
        object.__setattr__(self, "blocks",
                           tuple(slice(int(a), int(c)) for a, c in zip(offsets[:-1], offsets[1:])))
        for sl in self.blocks:
            if not np.allclose(A[sl, sl], A[sl, sl].T, atol=1e-14):
                raise ValueError("own-curvature blocks A_ii must be symmetric")
        for M in (self.Qxx, self.Qyy) + self.P:
            if not np.allclose(M, M.T, atol=1e-14):
                raise ValueError("Qxx, Qyy and P_i must be symmetric")
        mu = float(np.linalg.eigvalsh(_sym(A))[0])
        if not mu > 0:
            raise MonotonicityViolation(
                f"symmetric part of H_y has minimum eigenvalue {mu} <= 0")
        object.__setattr__(self, "mu_g", mu)

    @property
    def n0(self) -> int:
        return self.B.shape[1]

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return len(self.block_sizes)

    # ---- closed-form oracles of the game itself ---------------------------

    def f(self, x, y) -> float:
        return float(0.5 * x @ self.Qxx @ x + x @ self.Qxy @ y + 0.5 * y @ self.Qyy @ y
                     + self.qx @ x + self.qy @ y + self.f0)

    def f_grad_x(self, x, y):
        return self.Qxx @ x + self.Qxy @ y + self.qx

    def f_grad_y(self, x, y):
        return self.Qxy.T @ x + self.Qyy @ y + self.qy

    def g(self, i, x, y) -> float:
        sl = self.blocks[i]
        yi = y[sl]
        own = self.A[sl, sl]
        cross = self.A[sl] @ y - own @ yi
        return float(0.5 * yi @ own @ yi + yi @ (cross + self.B[sl] @ x + self.b[sl])
                     + 0.5 * x @ self.P[i] @ x + self.p[i] @ x)

    def g_grad_x(self, i, x, y):
        sl = self.blocks[i]
        return self.B[sl].T @ y[sl] + self.P[i] @ x + self.p[i]

    def g_grad_own(self, i, x, y):
        sl = self.blocks[i]
        return self.A[sl] @ y + self.B[sl] @ x + self.b[sl]

    def g_grad_y(self, i, x, y):
        """Full gradient of ``g_i`` in every follower block."""
        sl = self.blocks[i]
        out = self.A[sl].T @ y[sl]
        out[sl] = self.g_grad_own(i, x, y)
        return out

    def operator(self, x, y):
        return self.A @ y + self.B @ x + self.b

    def own_block_diag(self) -> np.ndarray:
        D = np.zeros_like(self.A)
        for sl in self.blocks:
            D[sl, sl] = self.A[sl, sl]
        return D

    def follower_hessian(self, i) -> np.ndarray:
        """Hessian of ``g_i`` in the joint variable ``(x, y)``."""
        n0, N = self.n0, self.N
        sl = self.blocks[i]
        H = np.zeros((n0 + N, n0 + N))
        H[:n0, :n0] = self.P[i]
        rows = slice(n0 + sl.start, n0 + sl.stop)
        H[rows, :n0] = self.B[sl]
        H[:n0, rows] = self.B[sl].T
        Ai = self.A[sl]
        H[rows, n0:] += Ai
        H[n0:, rows] += Ai.T
        H[rows, rows] = self.A[sl, sl]
        return H

    def leader_hessian(self) -> np.ndarray:
        return np.block([[self.Qxx, self.Qxy], [self.Qxy.T, self.Qyy]])


# ---- exact equilibrium quantities -------------------------------------------

def exact_followers_equilibrium(spec: QuadraticGameSpec, x) -> np.ndarray:
    """Solve ``H_y y = -(H_x x + b)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.linalg.solve(spec.A, -(spec.B @ x + spec.b))


def exact_implicit_jacobian(spec: QuadraticGameSpec) -> np.ndarray:
    """``d y*/d x = -H_y^{-1} H_x`` (constant for this family)."""
    return -np.linalg.solve(spec.A, spec.B)


def exact_F(spec: QuadraticGameSpec, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return spec.f(x, exact_followers_equilibrium(spec, x))


def exact_true_gradient(spec: QuadraticGameSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = exact_followers_equilibrium(spec, x)
    J = exact_implicit_jacobian(spec)
    return spec.f_grad_x(x, y) + J.T @ spec.f_grad_y(x, y)


def reduced_hessian(spec: QuadraticGameSpec) -> np.ndarray:
    """Hessian of ``F(x) = f(x, y*(x))``."""
    J = exact_implicit_jacobian(spec)
    H = spec.Qxx + spec.Qxy @ J + J.T @ spec.Qxy.T + J.T @ spec.Qyy @ J
    return _sym(H)


def exact_stackelberg_point(spec: QuadraticGameSpec):
    """Return ``(x*, y*(x*))``; raises NoEquilibrium if F is not strongly convex."""
    H = reduced_hessian(spec)
    if not np.linalg.eigvalsh(H)[0] > 1e-12:
        raise NoEquilibrium("reduced leader quadratic is not positive definite")
    x = -np.linalg.solve(H, exact_true_gradient(spec, np.zeros(spec.n0)))
    return x, exact_followers_equilibrium(spec, x)


def exact_lagrangian_minimizer(spec: QuadraticGameSpec, lam: float, x,
                               ell_f1: Optional[float] = None) -> np.ndarray:
    """Minimizer in ``y`` of the Lagrangian built on the exact equilibrium.

    Block ``i`` of the stationarity system reads
    ``grad_{y_i} f(x, y) + lam (A_ii y_i + sum_{j != i} A_ij y*_j + B_i x + b_i) = 0``.

    With ``ell_f1`` given, ``lam`` must clear the declared threshold
    ``2 ell_f1 / mu_g``.  Otherwise the exact condition is enforced: the
    Hessian in ``y`` must be positive definite.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    D = spec.own_block_diag()
    H = spec.Qyy + lam * D
    if ell_f1 is not None:
        threshold = 2.0 * ell_f1 / spec.mu_g
        if lam < threshold * (1 - 1e-12):
            raise ConvexityViolation(f"lambda={lam} below threshold {threshold}")
    elif not np.linalg.eigvalsh(_sym(H))[0] > 0:
        raise ConvexityViolation(f"Lagrangian is not strongly convex in y at lambda={lam}")
    ystar = exact_followers_equilibrium(spec, x)
    rhs = -(spec.Qxy.T @ x + spec.qy) - lam * ((spec.A - D) @ ystar + spec.B @ x + spec.b)
    return np.linalg.solve(H, rhs)


def exact_lagrangian_value(spec: QuadraticGameSpec, lam: float, x, y) -> float:
    """``f(x, y) + lam * sum_i [g_i(x, y_i, y*_{-i}(x)) - g_i(x, y*(x))]``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ystar = exact_followers_equilibrium(spec, x)
    total = spec.f(x, y)
    for i, sl in enumerate(spec.blocks):
        w = ystar.copy()
        w[sl] = y[sl]
        total += lam * (spec.g(i, x, w) - spec.g(i, x, ystar))
    return total


def exact_lagrangian_grad_x(spec: QuadraticGameSpec, lam: float, x, y) -> np.ndarray:
    """Total x-derivative of the exact Lagrangian at fixed ``y``.

    Includes the dependence through ``y*(x)``; the own-block terms vanish at
    the equilibrium, leaving the cross-follower sensitivities.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ystar = exact_followers_equilibrium(spec, x)
    J = exact_implicit_jacobian(spec)
    out = spec.f_grad_x(x, y).astype(float)
    for i, sl in enumerate(spec.blocks):
        w = ystar.copy()
        w[sl] = y[sl]
        dw = spec.g_grad_x(i, x, w) + J.T @ _mask_other(spec.g_grad_y(i, x, w), sl)
        dstar = spec.g_grad_x(i, x, ystar) + J.T @ spec.g_grad_y(i, x, ystar)
        out += lam * (dw - dstar)
    return out


def _mask_other(v, sl):
    out = v.copy()
    out[sl] = 0.0
    return out


def exact_lagrangian_grad_y(spec: QuadraticGameSpec, lam: float, x, y) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ystar = exact_followers_equilibrium(spec, x)
    out = spec.f_grad_y(x, y).astype(float)
    for i, sl in enumerate(spec.blocks):
        w = ystar.copy()
        w[sl] = y[sl]
        out[sl] += lam * spec.g_grad_own(i, x, w)
    return out


def exact_envelope_gradient(spec: QuadraticGameSpec, lam: float, x,
                            ell_f1: Optional[float] = None) -> np.ndarray:
    """Gradient of ``x -> min_y L_lam(x, y)``."""
    y = exact_lagrangian_minimizer(spec, lam, x, ell_f1)
    return exact_lagrangian_grad_x(spec, lam, x, y)


# ---- constants ---------------------------------------------------------------

def _box_vertices(lower, upper, limit=2**20):
    dim = len(lower)
    if 2 ** dim > limit:
        raise ValueError(f"box of dimension {dim} too large for vertex enumeration")
    for mask in itertools.product((0, 1), repeat=dim):
        m = np.array(mask, dtype=bool)
        yield np.where(m, upper, lower)


def derive_constants(spec: QuadraticGameSpec, x_box: Optional[Box],
                     y_box: Optional[Box]) -> SmoothnessConstants:
    """Compute valid smoothness constants for ``spec`` on the given boxes.

    * ``mu_g``: least eigenvalue of the symmetric part of ``H_y``.
    * ``ell_f1``: spectral norm of the leader's joint Hessian.
    * ``ell_g1``: the larger of ``||[H_x H_y]||`` and every follower's joint
      Hessian norm, so it also bounds ``||H_x||`` and ``||H_y||``.
    * ``ell_f0``, ``ell_g0``: maxima of the relevant gradient norms over box
      vertices (exact, since norms of affine maps are convex); ``inf`` when
      either box is missing or unbounded.
    """
    mu = spec.mu_g
    ell_f1 = float(np.linalg.norm(spec.leader_hessian(), 2))
    ell_g1 = float(np.linalg.norm(np.hstack([spec.B, spec.A]), 2))
    for i in range(spec.k):
        ell_g1 = max(ell_g1, float(np.linalg.norm(spec.follower_hessian(i), 2)))
    ell_g1 = max(ell_g1, mu)
    if x_box is None or y_box is None or not (x_box.bounded and y_box.bounded):
        ell_f0 = ell_g0 = math.inf
    else:
        ell_f0 = ell_g0 = 0.0
        lo = np.concatenate([x_box.lower, y_box.lower])
        hi = np.concatenate([x_box.upper, y_box.upper])
        n0 = spec.n0
        for v in _box_vertices(lo, hi):
            x, y = v[:n0], v[n0:]
            ell_f0 = max(ell_f0, float(np.linalg.norm(spec.f_grad_x(x, y))))
            gy = spec.f_grad_y(x, y)
            for i, sl in enumerate(spec.blocks):
                ell_f0 = max(ell_f0, float(np.linalg.norm(gy[sl])))
                ell_g0 = max(ell_g0, float(np.linalg.norm(spec.g_grad_x(i, x, y))))
        # strictly positive even for degenerate instances
        ell_f0 = max(ell_f0, 1e-12)
        ell_g0 = max(ell_g0, 1e-12)
    return SmoothnessConstants(mu_g=mu, ell_f0=ell_f0, ell_f1=max(ell_f1, 1e-12),
                               ell_g0=ell_g0, ell_g1=ell_g1, ell_g2=0.0)


# ---- finite differences -------------------------------------------------------

def fd_step(point) -> np.ndarray:
    """Per-coordinate central-difference step ``eps^(1/3) * max(1, |p|)``."""
    return EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(point))


def finite_difference_grad(fn: Callable[[np.ndarray], float], point,
                           h=None) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    steps = fd_step(point) if h is None else np.broadcast_to(np.asarray(h, dtype=float), point.shape)
    if not np.all(steps > 0):
        raise ValueError("finite-difference step must be > 0")
    grad = np.empty_like(point)
    for j in range(point.size):
        e = np.zeros_like(point)
        e[j] = steps[j]
        hi, lo = fn(point + e), fn(point - e)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise NumericFailure("non-finite function value in finite differences",
                                 iterate=point + e)
        grad[j] = (hi - lo) / (2.0 * steps[j])
    return grad


# ---- lemma verification ----------------------------------------------------------

@dataclass(frozen=True)
class LemmaGrid:
    lambdas: tuple
    xs: tuple                     # leader points, each a 1-D array
    ray_scales: tuple = (0.5, 1.0, 2.0, 4.0)

    @classmethod
    def default(cls, lo, hi, n_points=11, lambdas=None, threshold=2.0):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        xs = tuple(lo + s * (hi - lo) for s in np.linspace(0.0, 1.0, n_points))
        if lambdas is None:
            lambdas = tuple(2.0 ** e for e in range(1, 11) if 2.0 ** e >= threshold)
        return cls(tuple(float(v) for v in lambdas), xs)


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    max_ratio: float
    passed: bool
    evaluations: int
    detail: str = ""


def _ratio(lhs, rhs):
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs <= 1e-14 else math.inf


def _summarize(name, ratios, detail=""):
    worst = max(ratios) if ratios else 0.0
    return LemmaCheck(name, float(worst), bool(worst <= 1 + 1e-9), len(ratios), detail)


def check_lemma_yerr(spec, constants, grid: LemmaGrid) -> LemmaCheck:
    """Per-block distance between Lagrangian minimizer and equilibrium."""
    c = constants
    ratios = []
    for lam in grid.lambdas:
        rhs = 2.0 * c.ell_f0 / (lam * c.mu_g)
        for x in grid.xs:
            ylam = exact_lagrangian_minimizer(spec, lam, x)
            ystar = exact_followers_equilibrium(spec, x)
            for sl in spec.blocks:
                ratios.append(_ratio(float(np.linalg.norm(ylam[sl] - ystar[sl])), rhs))
    return _summarize("minimizer_distance", ratios)


def check_lemma_gradient_gap(spec, constants, grid: LemmaGrid):
    """Hypergradient vs envelope gradient; also returns the decay data."""
    k = spec.k
    ratios, decay = [], []
    for lam in grid.lambdas:
        rhs = gradient_gap_bound(constants, k, lam)
        worst = 0.0
        for x in grid.xs:
            gap = float(np.linalg.norm(exact_true_gradient(spec, x)
                                       - exact_envelope_gradient(spec, lam, x)))
            ratios.append(_ratio(gap, rhs))
            worst = max(worst, gap)
        decay.append((lam, worst))
    return _summarize("gradient_gap", ratios), decay


def check_lemma_bound1(spec, constants, grid: LemmaGrid) -> LemmaCheck:
    """Three-term bound at points along rays from y* through y*_lam."""
    c = constants
    k = spec.k
    J = exact_implicit_jacobian(spec)
    A_coef = c.ell_f1 + c.ell_g1 * c.ell_f1 * k / c.mu_g
    ratios = []
    for lam in grid.lambdas:
        B_coef = lam * c.ell_g1 + 2.0 * lam * c.ell_g1 ** 2 / c.mu_g
        for x in grid.xs:
            ystar = exact_followers_equilibrium(spec, x)
            ylam = exact_lagrangian_minimizer(spec, lam, x)
            gF = exact_true_gradient(spec, x)
            for s in grid.ray_scales:
                y = ystar + s * (ylam - ystar)
                gy = exact_lagrangian_grad_y(spec, lam, x, y)
                lhs = float(np.linalg.norm(gF - exact_lagrangian_grad_x(spec, lam, x, y) - J.T @ gy))
                d = [float(np.linalg.norm(y[sl] - ystar[sl])) for sl in spec.blocks]
                rhs = A_coef * sum(d) + B_coef * sum(v * v for v in d)
                ratios.append(_ratio(lhs, rhs))
    return _summarize("three_term_bound", ratios)


def check_lemma_minimizer_shift(spec, constants, grid: LemmaGrid) -> LemmaCheck:
    """Per-block sensitivity of the Lagrangian minimizer in (x, lambda)."""
    c = constants
    ratios = []
    lams = sorted(grid.lambdas)
    for a, lam1 in enumerate(lams):
        for lam2 in lams[a:]:
            for x1 in grid.xs:
                y1 = exact_lagrangian_minimizer(spec, lam1, x1)
                for x2 in grid.xs:
                    y2 = exact_lagrangian_minimizer(spec, lam2, x2)
                    dx = float(np.linalg.norm(x1 - x2))
                    rhs = (dx * (c.ell_f1 + c.ell_g1 * lam2)
                           + (lam2 - lam1) * c.ell_f0 / lam1) * 2.0 / (c.mu_g * lam2)
                    for sl in spec.blocks:
                        ratios.append(_ratio(float(np.linalg.norm(y1[sl] - y2[sl])), rhs))
    return _summarize("minimizer_shift", ratios)


def check_lemma_convexity(spec, constants, grid: LemmaGrid) -> LemmaCheck:
    """Strong convexity ``mu_g lam / 2`` and smoothness ``ell_l`` of the Lagrangian in y."""
    c = constants
    D = spec.own_block_diag()
    ratios = []
    lams = sorted(set(grid.lambdas) | {lambda_threshold(c)})
    for lam in lams:
        H = _sym(spec.Qyy + lam * D)
        eig = np.linalg.eigvalsh(H)
        ratios.append(_ratio(c.mu_g * lam / 2.0, float(eig[0])))
        ratios.append(_ratio(float(np.max(np.abs(eig))), c.ell_f1 + spec.k * lam * c.ell_g1))
    return _summarize("lagrangian_curvature", ratios)


def check_lemma_smoothness(spec, constants) -> LemmaCheck:
    """Implicit Jacobian bound and smoothness of F against declared constants."""
    c = constants
    J = exact_implicit_jacobian(spec)
    ratios = [_ratio(float(np.linalg.norm(J, 2)), c.ell_g1 / c.mu_g),
              _ratio(float(np.max(np.abs(np.linalg.eigvalsh(reduced_hessian(spec))))),
                     leader_smoothness(c))]
    return _summarize("smoothness", ratios)


def verify_lemma_bounds(spec: QuadraticGameSpec, constants: SmoothnessConstants,
                        grid: LemmaGrid) -> dict:
    """Evaluate each lemma's two sides exactly on ``grid``.

    Returns ``{name: LemmaCheck}``; a check passes iff its worst
    left/right ratio is at most ``1 + 1e-9``.
    """
    if not grid.xs or not grid.lambdas:
        raise ValueError("grid must be nonempty")
    gap_check, _ = check_lemma_gradient_gap(spec, constants, grid)
    checks = [
        check_lemma_yerr(spec, constants, grid),
        gap_check,
        check_lemma_bound1(spec, constants, grid),
        check_lemma_minimizer_shift(spec, constants, grid),
        check_lemma_convexity(spec, constants, grid),
        check_lemma_smoothness(spec, constants),
    ]
    return {c.name: c for c in checks}


def loglog_slope(points: Sequence[tuple]) -> float:
    """Least-squares slope of ``log(value)`` against ``log(lambda)``."""
    pts = [(a, v) for a, v in points if v > 0]
    if len(pts) < 2:
        return math.nan
    lx = np.log([a for a, _ in pts])
    ly = np.log([v for _, v in pts])
    return float(np.polyfit(lx, ly, 1)[0])


class QuadraticOracle:
    """Bundle of exact quantities consumed by the solver's telemetry and checks."""

    def __init__(self, spec: QuadraticGameSpec):
        self.spec = spec
        self._xstar = None

    def F(self, x) -> float:
        return exact_F(self.spec, x)

    def true_gradient(self, x) -> np.ndarray:
        return exact_true_gradient(self.spec, x)

    def followers_equilibrium(self, x) -> np.ndarray:
        return exact_followers_equilibrium(self.spec, x)

    def lagrangian_minimizer(self, lam, x) -> np.ndarray:
        return exact_lagrangian_minimizer(self.spec, lam, x)

    def stackelberg_point(self):
        if self._xstar is None:
            self._xstar = exact_stackelberg_point(self.spec)
        return self._xstar

    def F_star(self) -> float:
        x, _ = self.stackelberg_point()
        return self.F(x)


# ---- oracle consistency ------------------------------------------------------------

def _rel_err(got, want) -> float:
    got = np.atleast_1d(np.asarray(got, dtype=float))
    want = np.atleast_1d(np.asarray(want, dtype=float))
    return float(np.linalg.norm(got - want)) / max(1.0, float(np.linalg.norm(want)))


def gradcheck_problem(problem, spec: Optional[QuadraticGameSpec] = None, points: int = 20,
                      seed: int = 0, radius: float = 1.0) -> dict:
    """Worst relative error of each gradient oracle against central differences.

    Points are drawn from the problem's boxes when bounded, otherwise from a
    cube of half-width ``radius``.  With ``spec`` the exact hypergradient is
    checked against differences of ``F`` as well.
    """
    rng = np.random.default_rng(seed)

    def draw(box, dim):
        if box is not None and box.bounded:
            return rng.uniform(box.lower, box.upper)
        return rng.uniform(-radius, radius, dim)

    worst: dict = {}

    def note(key, err):
        worst[key] = max(worst.get(key, 0.0), err)

    for _ in range(points):
        x = draw(problem.x_bounds, problem.n0)
        y = draw(problem.y_bounds, problem.N)
        lead = problem.leader
        note("leader.grad_x", _rel_err(lead.grad_x(x, y),
                                       finite_difference_grad(lambda u: lead.value(u, y), x)))
        note("leader.grad_y", _rel_err(lead.grad_y(x, y),
                                       finite_difference_grad(lambda v: lead.value(x, v), y)))
        for fol, sl in zip(problem.followers, problem.blocks):
            note(f"g{fol.index}.grad_x",
                 _rel_err(fol.grad_x(x, y), finite_difference_grad(lambda u: fol.value(u, y), x)))
            fd_own = finite_difference_grad(
                lambda v: fol.value(x, problem.splice(y, fol.index, v)), y[sl])
            note(f"g{fol.index}.grad_own", _rel_err(fol.grad_own(x, y), fd_own))
        if spec is not None:
            note("F.true_gradient", _rel_err(exact_true_gradient(spec, x),
                                             finite_difference_grad(lambda u: exact_F(spec, u), x)))
    return worst
