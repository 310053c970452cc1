import numpy as np
import pytest

from stackelberg_fo.errors import NumericFailure
from stackelberg_fo.monotone import (MonotoneSolveConfig, extragradient_step,
                                     solve_followers_game)
from stackelberg_fo.oracle import exact_followers_equilibrium
from stackelberg_fo.problems import CATALOG_NAMES

X1 = np.array([1.0])


def test_extragradient_converges_sq2(sq2):
    res = solve_followers_game(sq2, X1, np.zeros(2),
                               MonotoneSolveConfig(step=0.5, tol=1e-8, max_iters=1000))
    np.testing.assert_allclose(res.z, [1.0, 1.0], atol=1e-8)
    assert res.final_operator_norm <= 1e-8


def test_one_extragradient_iteration(sq2):
    res = solve_followers_game(sq2, X1, np.zeros(2), MonotoneSolveConfig(step=0.5, max_iters=1, tol=0))
    np.testing.assert_allclose(res.z, [0.25, 0.25], atol=1e-15)
    assert res.iters_used == 1


def test_already_at_zero(sq2):
    res = solve_followers_game(sq2, np.zeros(1), np.zeros(2), MonotoneSolveConfig(tol=1e-12))
    assert res.iters_used == 0
    np.testing.assert_array_equal(res.z, [0.0, 0.0])


@pytest.mark.parametrize("z, step, expected", [
    ((0.0, 0.0), 0.5, (0.25, 0.25)),
    ((1.0, 1.0), 0.3, (1.0, 1.0)),
])
def test_extragradient_step(sq2, z, step, expected):
    np.testing.assert_allclose(extragradient_step(sq2, X1, np.array(z), step), expected, atol=1e-15)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_fixed_point(entries, name):
    e = entries[name]
    x = 0.5 * (e.verify_range[0] + e.verify_range[1])
    zs = exact_followers_equilibrium(e.spec, x)
    np.testing.assert_allclose(extragradient_step(e.problem, x, zs, 0.1), zs, atol=1e-12)


def test_config_validation(sq2):
    with pytest.raises(ValueError):
        MonotoneSolveConfig(method="optimistic")
    with pytest.raises(ValueError):
        MonotoneSolveConfig(max_iters=0)
    with pytest.raises(ValueError):
        MonotoneSolveConfig(step=1.0).resolved_step(sq2)   # 1/ell_g1 = 0.5
    assert MonotoneSolveConfig().resolved_step(sq2) == pytest.approx(0.25)


@pytest.mark.parametrize("method, per_iter", [("extragradient", 2), ("simultaneous-gd", 1)])
def test_grad_eval_accounting(sq2, method, per_iter):
    from stackelberg_fo.core import count_evaluations
    wrapped, counter = count_evaluations(sq2)
    res = solve_followers_game(wrapped, X1, np.zeros(2), MonotoneSolveConfig(method, max_iters=7, tol=0))
    assert res.iters_used == 7
    assert res.grad_evals == counter["grad"] == sq2.k * (per_iter * 7 + 1)


@pytest.mark.parametrize("name", CATALOG_NAMES)
@pytest.mark.parametrize("method", ["extragradient", "simultaneous-gd"])
def test_contraction(entries, name, method):
    """Distance to the equilibrium shrinks by a constant factor every step."""
    e = entries[name]
    x = e.verify_range[0] + 0.3 * (e.verify_range[1] - e.verify_range[0])
    zs = exact_followers_equilibrium(e.spec, x)
    z = e.problem.project_y(zs + 1.0)
    ratios = []
    cfg = MonotoneSolveConfig(method, max_iters=1, tol=0)
    for _ in range(30):
        d0 = np.linalg.norm(z - zs)
        if d0 < 1e-12:
            break
        z = solve_followers_game(e.problem, x, z, cfg).z
        ratios.append(np.linalg.norm(z - zs) / d0)
    assert max(ratios) < 1.0


def test_certificate_rate(entries):
    e = entries["coupled-c0.75"]
    x = np.array([1.0])
    norms = [solve_followers_game(e.problem, x, np.full(e.problem.N, -2.0),
                                  MonotoneSolveConfig(max_iters=m, tol=0)).final_operator_norm
             for m in (10, 100, 1000)]
    assert norms[1] <= norms[0] / 10 and norms[2] <= norms[1] / 10


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_operator_norm_bounds_distance(entries, name):
    e = entries[name]
    x = 0.5 * (e.verify_range[0] + e.verify_range[1])
    for m in (1, 3, 10):
        res = solve_followers_game(e.problem, x, np.zeros(e.problem.N), MonotoneSolveConfig(max_iters=m, tol=0))
        dist = np.linalg.norm(res.z - exact_followers_equilibrium(e.spec, x))
        assert dist <= res.final_operator_norm / e.problem.constants.mu_g + 1e-12


def test_deterministic(entries):
    p = entries["cournot-asym"].problem
    cfg = MonotoneSolveConfig(max_iters=50, tol=0)
    a = solve_followers_game(p, np.array([2.0]), np.zeros(3), cfg)
    b = solve_followers_game(p, np.array([2.0]), np.zeros(3), cfg)
    assert a.z.tobytes() == b.z.tobytes() and a.final_operator_norm == b.final_operator_norm


def test_nan_raises_with_iterate(sq2):
    with pytest.raises(NumericFailure) as info:
        solve_followers_game(sq2, np.array([np.nan]), np.zeros(2), MonotoneSolveConfig())
    assert info.value.iterate is not None
