import numpy as np
import pytest

from stackelberg_fo.errors import ConvexityViolation, MonotonicityViolation, NoEquilibrium, NumericFailure
from stackelberg_fo.oracle import (LemmaGrid, QuadraticGameSpec, exact_envelope_gradient,
                                   exact_F, exact_followers_equilibrium, exact_implicit_jacobian,
                                   exact_lagrangian_grad_y, exact_lagrangian_minimizer,
                                   exact_lagrangian_value, exact_stackelberg_point,
                                   exact_true_gradient, finite_difference_grad, gradcheck_problem,
                                   verify_lemma_bounds)
from stackelberg_fo.problems import CATALOG_NAMES

COUPLED = QuadraticGameSpec(A=[[2.0, 1.0], [1.0, 2.0]], B=[[-1.0], [-1.0]], b=[0.0, 0.0],
                            block_sizes=(1, 1), Qxx=[[1.0]], Qxy=[[0.0, 0.0]], Qyy=np.eye(2),
                            qx=[0.0], qy=[0.0, 0.0])


def _decoupled_spec():
    # followers ignore x; leader separable with x-part 1/2 (x - 2)^2
    return QuadraticGameSpec(A=np.eye(2), B=np.zeros((2, 1)), b=[-1.0, 0.5], block_sizes=(1, 1),
                             Qxx=[[1.0]], Qxy=np.zeros((1, 2)), Qyy=np.eye(2), qx=[-2.0], qy=[0.0, 0.0])


@pytest.mark.parametrize("x, expected", [(0.5, (0.5, 0.5)), (0.0, (0.0, 0.0))])
def test_equilibrium_sq2(sq2_spec, x, expected):
    np.testing.assert_allclose(exact_followers_equilibrium(sq2_spec, [x]), expected, atol=1e-15)


def test_equilibrium_coupled():
    np.testing.assert_allclose(exact_followers_equilibrium(COUPLED, [3.0]), [1.0, 1.0], atol=1e-14)


@pytest.mark.parametrize("spec_name, expected", [("sq2", [[1.0], [1.0]]), ("coupled", [[1 / 3], [1 / 3]]),
                                                 ("decoupled", [[0.0], [0.0]])])
def test_implicit_jacobian(sq2_spec, spec_name, expected):
    spec = {"sq2": sq2_spec, "coupled": COUPLED, "decoupled": _decoupled_spec()}[spec_name]
    J = exact_implicit_jacobian(spec)
    np.testing.assert_allclose(J, expected, atol=1e-14)
    assert np.linalg.norm(spec.B + spec.A @ J) <= 1e-12


@pytest.mark.parametrize("x, expected", [(1.0, 3.0), (0.0, 0.0), (-2.0, -6.0)])
def test_true_gradient_sq2(sq2_spec, x, expected):
    assert exact_true_gradient(sq2_spec, [x])[0] == pytest.approx(expected, abs=1e-14)


def test_stackelberg_point_sq2(sq2, sq2_spec):
    from stackelberg_fo.core import check_epsilon_stationary
    x, y = exact_stackelberg_point(sq2_spec)
    np.testing.assert_allclose(x, [0.0], atol=1e-15)
    np.testing.assert_allclose(y, [0.0, 0.0], atol=1e-15)
    for eps in (1e-3, 1e-9):
        assert check_epsilon_stationary(sq2, x, y, eps, true_grad=exact_true_gradient(sq2_spec, x))


def test_stackelberg_point_decoupled():
    x, y = exact_stackelberg_point(_decoupled_spec())
    np.testing.assert_allclose(x, [2.0])
    np.testing.assert_allclose(y, [1.0, -0.5])


def test_stackelberg_point_shifted_leader(sq2_spec):
    shifted = QuadraticGameSpec(A=sq2_spec.A, B=sq2_spec.B, b=sq2_spec.b, block_sizes=(1, 1),
                                Qxx=[[1.0]], Qxy=np.zeros((1, 2)), Qyy=np.eye(2), qx=[-1.0], qy=[0, 0],
                                f0=0.5, P=sq2_spec.P)
    x, y = exact_stackelberg_point(shifted)
    np.testing.assert_allclose(x, [1 / 3], atol=1e-15)
    np.testing.assert_allclose(y, [1 / 3, 1 / 3], atol=1e-15)


def test_stackelberg_point_indefinite():
    spec = QuadraticGameSpec(A=np.eye(1), B=np.zeros((1, 1)), b=[0.0], block_sizes=(1,),
                             Qxx=[[-1.0]], Qxy=np.zeros((1, 1)), Qyy=np.eye(1), qx=[0.0], qy=[0.0])
    with pytest.raises(NoEquilibrium):
        exact_stackelberg_point(spec)


def test_non_monotone_spec_rejected():
    with pytest.raises(MonotonicityViolation):
        QuadraticGameSpec(A=[[1.0, 2.0], [2.0, 1.0]], B=np.zeros((2, 1)), b=[0, 0], block_sizes=(1, 1),
                          Qxx=[[1.0]], Qxy=np.zeros((1, 2)), Qyy=np.eye(2), qx=[0.0], qy=[0, 0])


@pytest.mark.parametrize("lam, expected", [(1.0, 0.5), (9.0, 0.9)])
def test_lagrangian_minimizer_sq2(sq2_spec, lam, expected):
    np.testing.assert_allclose(exact_lagrangian_minimizer(sq2_spec, lam, [1.0]), [expected] * 2, atol=1e-15)


def test_lagrangian_minimizer_threshold(sq2_spec):
    with pytest.raises(ConvexityViolation):
        exact_lagrangian_minimizer(sq2_spec, 1.0, [1.0], ell_f1=1.0)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_lagrangian_minimizer_limit_and_stationarity(entries, name):
    e = entries[name]
    x = 0.5 * (e.verify_range[0] + e.verify_range[1])
    np.testing.assert_allclose(exact_lagrangian_minimizer(e.spec, 2.0 ** 20, x),
                               exact_followers_equilibrium(e.spec, x), atol=1e-5)
    lam = 3 * 2 * e.problem.constants.ell_f1 / e.problem.constants.mu_g
    y = exact_lagrangian_minimizer(e.spec, lam, x)
    assert np.linalg.norm(exact_lagrangian_grad_y(e.spec, lam, x, y)) <= 1e-10 * max(1, lam)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_true_gradient_matches_fd(entries, name):
    e = entries[name]
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.uniform(*e.verify_range)
        fd = finite_difference_grad(lambda u: exact_F(e.spec, u), x)
        np.testing.assert_allclose(exact_true_gradient(e.spec, x), fd, atol=1e-7 * max(1, np.abs(fd).max()))


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_envelope_gradient_matches_fd(entries, name):
    """The exact envelope gradient includes the chain terms through y*(x)."""
    e = entries[name]
    lam = 16.0 * max(1.0, 2 * e.problem.constants.ell_f1 / e.problem.constants.mu_g)
    x = e.verify_range[0] + 0.3 * (e.verify_range[1] - e.verify_range[0])
    env = lambda u: exact_lagrangian_value(e.spec, lam, u, exact_lagrangian_minimizer(e.spec, lam, u))
    fd = finite_difference_grad(env, x)
    np.testing.assert_allclose(exact_envelope_gradient(e.spec, lam, x), fd, rtol=1e-6, atol=1e-6)


def test_fd_examples():
    np.testing.assert_allclose(finite_difference_grad(lambda p: 0.5 * p @ p, [3.0, 4.0], h=1e-5),
                               [3.0, 4.0], atol=1e-8)
    np.testing.assert_array_equal(finite_difference_grad(lambda p: 7.0, [1.0, -2.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        finite_difference_grad(lambda p: 0.0, [1.0], h=0.0)
    with pytest.raises(NumericFailure):
        finite_difference_grad(lambda p: np.inf, [1.0])


def test_fd_hypergradient_sq2(sq2_spec):
    assert finite_difference_grad(lambda u: exact_F(sq2_spec, u), [1.0])[0] == pytest.approx(3.0, abs=1e-7)


def _sq2_grid():
    return LemmaGrid.default([-1.0], [1.0], n_points=11, lambdas=[2.0 ** e for e in range(1, 11)])


def test_lemma_bounds_sq2(sq2, sq2_spec):
    report = verify_lemma_bounds(sq2_spec, sq2.constants, _sq2_grid())
    assert all(chk.passed for chk in report.values()), report


def test_lemma_bounds_degenerate_grid(sq2, sq2_spec):
    grid = LemmaGrid(lambdas=(2.0, 8.0), xs=(np.zeros(1),))
    report = verify_lemma_bounds(sq2_spec, sq2.constants, grid)
    for key in ("minimizer_distance", "gradient_gap", "three_term_bound"):
        assert report[key].max_ratio == 0.0


def test_lemma_negative_control(sq2, sq2_spec):
    with pytest.warns(UserWarning):
        inflated = sq2.constants.replace(mu_g=10 * sq2.constants.mu_g)
    assert not verify_lemma_bounds(sq2_spec, inflated, _sq2_grid())["minimizer_distance"].passed


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_lemma_bounds_catalog(entries, name):
    e = entries[name]
    c = e.problem.constants
    lambdas = [2.0 ** j for j in range(1, 11) if 2.0 ** j >= 2 * c.ell_f1 / c.mu_g]
    grid = LemmaGrid.default(*e.verify_range, n_points=7, lambdas=lambdas)
    report = verify_lemma_bounds(e.spec, c, grid)
    assert all(chk.passed for chk in report.values()), report


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_convexity_at_threshold(entries, name):
    e = entries[name]
    c = e.problem.constants
    lam = 2 * c.ell_f1 / c.mu_g
    H = e.spec.Qyy + lam * e.spec.own_block_diag()
    assert np.linalg.eigvalsh(0.5 * (H + H.T))[0] >= c.mu_g * lam / 2 - 1e-9


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_jacobian_bound(entries, name):
    e = entries[name]
    c = e.problem.constants
    assert np.linalg.norm(exact_implicit_jacobian(e.spec), 2) <= c.ell_g1 / c.mu_g * (1 + 1e-12)


@pytest.mark.parametrize("name, agrees", [("sq2", True), ("coupled-c0.5", False), ("cournot-sym", False)])
def test_partial_gradient_vs_envelope(entries, name, agrees):
    """At exact inner points the partial x-gradient drops the cross-follower
    chain terms, so it matches the envelope gradient only for block-diagonal A."""
    from stackelberg_fo.lagrangian import surrogate_grad_x
    e = entries[name]
    x = e.verify_range[0] + 0.25 * (e.verify_range[1] - e.verify_range[0])
    lam = 64.0
    y = exact_lagrangian_minimizer(e.spec, lam, x)
    z = exact_followers_equilibrium(e.spec, x)
    gap = np.linalg.norm(surrogate_grad_x(e.problem, lam, x, y, z) - exact_envelope_gradient(e.spec, lam, x))
    assert (gap <= 1e-9) == agrees


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_gradcheck_catalog(entries, name):
    worst = gradcheck_problem(entries[name].problem, entries[name].spec, points=10)
    assert max(worst.values()) <= 1e-5


def test_coupled_jacobian_consistent_with_equilibrium():
    # y* is linear through the origin here, so y*(3) = 3 J
    np.testing.assert_allclose(exact_followers_equilibrium(COUPLED, [3.0]),
                               3 * exact_implicit_jacobian(COUPLED)[:, 0], atol=1e-14)
