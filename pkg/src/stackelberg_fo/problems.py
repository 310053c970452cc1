"""Built-in problem instances.

Every built-in is affine-quadratic, so each entry carries a
``QuadraticGameSpec`` and exact ground truth is available for all of them.
User builders may be registered under a name; entries without a spec still
run, but oracle-backed checks are skipped for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .core import (Box, FollowerCost, LeaderObjective, SmoothnessConstants,
                   StackelbergProblem, check_strong_monotonicity)
from .errors import ConfigError, MonotonicityViolation
from .oracle import QuadraticGameSpec, QuadraticOracle, derive_constants


@dataclass(frozen=True, eq=False)
class ProblemCatalogEntry:
    name: str
    params: dict
    problem: StackelbergProblem
    spec: Optional[QuadraticGameSpec]
    x0: np.ndarray
    verify_range: tuple           # (lo, hi) leader box used by lemma grids
    constants_table: dict = field(default_factory=dict)

    def oracle(self) -> Optional[QuadraticOracle]:
        if self.spec is None:
            return None
        return QuadraticOracle(self.spec)

    def with_constants(self, constants: SmoothnessConstants) -> "ProblemCatalogEntry":
        return ProblemCatalogEntry(self.name, self.params, self.problem.with_constants(constants),
                                   self.spec, self.x0, self.verify_range, constants.as_dict())


def problem_from_spec(spec: QuadraticGameSpec, constants: SmoothnessConstants,
                      x_bounds: Optional[Box] = None, y_bounds: Optional[Box] = None,
                      name: str = "") -> StackelbergProblem:
    """Wrap the closed-form quadratic oracles as a first-order problem."""
    leader = LeaderObjective(spec.f, spec.f_grad_x, spec.f_grad_y)

    def follower(i):
        return FollowerCost(i,
                            lambda x, y: spec.g(i, x, y),
                            lambda x, y: spec.g_grad_x(i, x, y),
                            lambda x, y: spec.g_grad_own(i, x, y))

    return StackelbergProblem(leader, [follower(i) for i in range(spec.k)], spec.n0,
                              spec.block_sizes, constants, x_bounds, y_bounds, name)


def _entry(name, params, spec, x_box, y_box, x0, verify_range):
    constants = derive_constants(spec, x_box, y_box)
    problem = problem_from_spec(spec, constants, x_box, y_box, name)
    return ProblemCatalogEntry(name, dict(params), problem, spec,
                               np.atleast_1d(np.asarray(x0, dtype=float)),
                               tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in verify_range),
                               constants.as_dict())


def make_symmetric_quadratic(k: int, coupling: float = 0.0, leader_shift=0.0,
                             radius: Optional[float] = None, name: Optional[str] = None,
                             x0=None) -> ProblemCatalogEntry:
    """``f = 1/2 |x - s|^2 + 1/2 |y|^2`` and ``g_i = 1/2 |y_i - x|^2 + c y_i' sum_{j != i} y_j``.

    Each follower block has the leader's dimension ``len(s)``, so
    ``grad_{y_i} g_i = y_i + c sum_{j != i} y_j - x``.  All variables live in
    the cube of half-width ``radius`` (default ``2 max(1, |s|_inf)``).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= coupling < 1:
        raise ValueError("coupling must lie in [0, 1)")
    if coupling * (k - 1) >= 1:
        raise MonotonicityViolation(
            f"coupling {coupling} with k={k} breaks strong monotonicity (c(k-1) >= 1)")
    shift = np.atleast_1d(np.asarray(leader_shift, dtype=float))
    n = shift.size
    N = k * n
    I = np.eye(n)
    A = np.kron(np.eye(k) + coupling * (np.ones((k, k)) - np.eye(k)), I)
    B = -np.kron(np.ones((k, 1)), I)
    spec = QuadraticGameSpec(
        A=A, B=B, b=np.zeros(N), block_sizes=(n,) * k,
        Qxx=I, Qxy=np.zeros((n, N)), Qyy=np.eye(N), qx=-shift, qy=np.zeros(N),
        f0=0.5 * float(shift @ shift), P=[I] * k, p=[np.zeros(n)] * k)
    R = float(radius) if radius is not None else 2.0 * max(1.0, float(np.max(np.abs(shift))))
    x_box = Box(-R * np.ones(n), R * np.ones(n))
    y_box = Box(-R * np.ones(N), R * np.ones(N))
    name = name or f"symmetric-k{k}-c{coupling:g}"
    params = {"k": k, "coupling": coupling, "leader_shift": shift.tolist(), "radius": R}
    return _entry(name, params, spec, x_box, y_box,
                  np.ones(n) if x0 is None else x0, (-np.ones(n), np.ones(n)))


def make_cournot(k: int, a: float, b: float, costs=None, tax_weight: float = 1.0,
                 y_target=1.0, q_max: Optional[float] = None, name: Optional[str] = None,
                 x0=None) -> ProblemCatalogEntry:
    """Cournot market with a per-unit tax ``x`` set by the leader.

    Firm ``i`` pays ``g_i = -(a - b sum_j y_j) y_i + (c_i + x) y_i`` and the
    leader pays ``f = -x sum_i y_i + w/2 |y - y_target|^2``.  Quantities live
    in ``[0, q_max]`` (default ``2a/b``); the tax lives in ``[0, x_max]``
    where ``x_max`` is the largest tax keeping every unconstrained
    equilibrium quantity nonnegative.
    """
    if not (b > 0 and a > 0 and tax_weight >= 0 and k >= 1):
        raise ValueError("need a > 0, b > 0, tax_weight >= 0, k >= 1")
    c = np.ones(k) if costs is None else np.asarray(costs, dtype=float).reshape(k)
    yt = np.broadcast_to(np.asarray(y_target, dtype=float), (k,)).copy()
    A = b * (np.eye(k) + np.ones((k, k)))
    spec = QuadraticGameSpec(
        A=A, B=np.ones((k, 1)), b=c - a, block_sizes=(1,) * k,
        Qxx=np.zeros((1, 1)), Qxy=-np.ones((1, k)), Qyy=tax_weight * np.eye(k),
        qx=np.zeros(1), qy=-tax_weight * yt, f0=0.5 * tax_weight * float(yt @ yt),
        P=[np.zeros((1, 1))] * k, p=[np.zeros(1)] * k)
    q_max = 2.0 * a / b if q_max is None else float(q_max)
    x_max = float(np.min(a + c.sum() - (k + 1) * c))
    if not x_max > 0:
        raise ValueError("costs leave no tax level with all firms active")
    x_box = Box(np.zeros(1), np.array([x_max]))
    y_box = Box(np.zeros(k), q_max * np.ones(k))
    name = name or f"cournot-k{k}"
    params = {"k": k, "a": a, "b": b, "costs": c.tolist(), "tax_weight": tax_weight,
              "y_target": yt.tolist(), "q_max": q_max}
    return _entry(name, params, spec, x_box, y_box,
                  np.array([x_max / 4.0]) if x0 is None else x0,
                  (np.zeros(1), np.array([x_max])))


# -- registry ------------------------------------------------------------------

_REGISTRY: Dict[str, tuple] = {}


def register(key: str, builder: Callable[..., ProblemCatalogEntry], **defaults) -> None:
    """Make ``builder(**defaults, **overrides)`` addressable by ``key``."""
    _REGISTRY[key] = (builder, dict(defaults))


register("sq2", make_symmetric_quadratic, k=2, coupling=0.0, leader_shift=0.0, name="sq2")
register("coupled-c0.25", make_symmetric_quadratic, k=3, coupling=0.25, leader_shift=0.5,
         name="coupled-c0.25")
register("coupled-c0.5", make_symmetric_quadratic, k=2, coupling=0.5, leader_shift=0.5,
         name="coupled-c0.5")
register("coupled-c0.75", make_symmetric_quadratic, k=2, coupling=0.75, leader_shift=0.5,
         name="coupled-c0.75")
register("cournot-sym", make_cournot, k=2, a=10.0, b=1.0, costs=[1.0, 1.0], tax_weight=1.0,
         y_target=2.0, name="cournot-sym", x0=[2.0])
register("cournot-asym", make_cournot, k=3, a=12.0, b=2.0, costs=[1.0, 2.0, 3.0],
         tax_weight=0.5, y_target=1.0, name="cournot-asym", x0=[2.0])

CATALOG_NAMES = ("sq2", "coupled-c0.25", "coupled-c0.5", "coupled-c0.75",
                 "cournot-sym", "cournot-asym")


def names():
    return tuple(_REGISTRY)


def get_entry(name: str, **overrides) -> ProblemCatalogEntry:
    if name not in _REGISTRY:
        raise ConfigError(f"unknown problem {name!r}; known: {', '.join(_REGISTRY)}")
    builder, defaults = _REGISTRY[name]
    try:
        return builder(**{**defaults, **overrides})
    except TypeError as exc:
        raise ConfigError(f"bad parameters for problem {name!r}: {exc}") from None


def validate_entry(entry: ProblemCatalogEntry, samples: int = 200, seed: int = 0,
                   atol: float = 1e-12) -> None:
    """Raise if the declared constants or the wrapped oracles are inconsistent."""
    problem = entry.problem
    report = check_strong_monotonicity(problem, samples, seed, radius=1.0)
    if not report.passed:
        raise MonotonicityViolation(
            f"{entry.name}: sampled modulus {report.min_ratio} < declared {report.mu_g}")
    spec = entry.spec
    if spec is None:
        return
    rng = np.random.default_rng(seed)
    for _ in range(10):
        x = rng.uniform(-1, 1, problem.n0)
        y = rng.uniform(-1, 1, problem.N)
        pairs = [(problem.leader.grad_x(x, y), spec.Qxx @ x + spec.Qxy @ y + spec.qx),
                 (problem.leader.grad_y(x, y), spec.Qxy.T @ x + spec.Qyy @ y + spec.qy)]
        for fol, sl in zip(problem.followers, spec.blocks):
            pairs.append((fol.grad_own(x, y), spec.A[sl] @ y + spec.B[sl] @ x + spec.b[sl]))
        for got, want in pairs:
            if not np.allclose(got, want, rtol=0, atol=atol):
                raise AssertionError(f"{entry.name}: oracle disagrees with spec")


def catalog() -> list:
    """The six built-in entries, each validated."""
    entries = [get_entry(n) for n in CATALOG_NAMES]
    for e in entries:
        validate_entry(e)
    return entries
