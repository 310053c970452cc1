"""Exception hierarchy shared by the solver, the oracle and the CLI."""

import numpy as np


class StackelbergError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(StackelbergError, ValueError):
    """An input vector does not match the dimensions of the problem."""


class NumericFailure(StackelbergError, FloatingPointError):
    """A gradient or iterate became NaN/Inf.

    The offending iterate is kept on ``iterate`` so callers can inspect it.
    """

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = None if iterate is None else np.array(iterate, dtype=float)


class BudgetExceeded(StackelbergError, RuntimeError):
    """An inner loop hit its hard iteration cap without converging."""


class ConvexityViolation(StackelbergError, ValueError):
    """The penalty multiplier is too small for the Lagrangian to be strongly convex."""


class MonotonicityViolation(StackelbergError, ValueError):
    """A followers' game fails the strong monotonicity requirement."""


class NoEquilibrium(StackelbergError, ValueError):
    """The reduced leader problem has no unique minimizer."""


class OracleUnavailable(StackelbergError, RuntimeError):
    """A check needs exact ground truth that this problem cannot provide."""


class ConfigError(StackelbergError, ValueError):
    """A run configuration could not be parsed or validated."""


def require_finite(vec, what, iterate=None):
    """Raise NumericFailure unless every entry of ``vec`` is finite."""
    vec = np.asarray(vec, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise NumericFailure(f"non-finite {what}", iterate=vec if iterate is None else iterate)
    return vec
