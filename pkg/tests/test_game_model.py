import numpy as np
import pytest

from gamecontrol import (
    ActionSet,
    ConstraintSpec,
    GameSpec,
    InvalidInputError,
    UnsupportedOperationError,
    constraint_violation,
    evaluate_gradient,
    perturbed_gradient,
    utility,
)
from gamecontrol.diagnostics import sample_joint
from gamecontrol.scenarios import DsmParams, QuadParams, gen_dsm, gen_quadratic

from conftest import scalar_game


def central_diff_block(game, n, x, h=1e-5):
    d = game.dim
    g = np.empty(d)
    for i in range(d):
        e = np.zeros_like(x)
        e[n * d + i] = h
        g[i] = (game.reward_value(n, x + e) - game.reward_value(n, x - e)) / (2 * h)
    return g


def test_scalar_stationary_point():
    assert evaluate_gradient(scalar_game(), np.array([1.0]))[0] == 0.0


def test_dsm_gradient_at_origin_is_omega():
    sc = gen_dsm(DsmParams(num_players=4, dim=3), seed=1)
    np.testing.assert_array_equal(
        evaluate_gradient(sc.game, np.zeros(12)), sc.arrays["omega"].ravel()
    )


@pytest.mark.parametrize("gen", ["dsm", "quadratic"])
def test_gradient_matches_finite_differences(gen):
    if gen == "dsm":
        sc = gen_dsm(DsmParams(num_players=5, dim=3), seed=2)
    else:
        sc = gen_quadratic(QuadParams(num_players=4, dim=3, rank_deficit=2), seed=2)
    game = sc.game
    rng = np.random.default_rng(0)
    for _ in range(50):
        # shrink towards the centre so that +-h stays inside the set
        x = 0.9 * sample_joint(game, rng) + 0.01
        g = evaluate_gradient(game, x)
        for n in range(game.num_players):
            fd = central_diff_block(game, n, x)
            blk = g[n * game.dim:(n + 1) * game.dim]
            assert np.linalg.norm(fd - blk) <= 1e-4 * max(np.linalg.norm(blk), 1.0)


def test_quadratic_gradient_formula():
    sc = gen_quadratic(QuadParams(num_players=3, dim=2, rank_deficit=1), seed=5)
    q, c, d = sc.arrays["Q"], sc.arrays["c"], 2
    x = np.random.default_rng(1).uniform(0, 1, 6)
    g = evaluate_gradient(sc.game, x)
    for n in range(3):
        rows = slice(n * d, (n + 1) * d)
        np.testing.assert_allclose(g[rows], ((q[n] + q[n].T) @ x)[rows] + c[rows], rtol=1e-12)


def test_perturbed_gradient_zero_control(scalar):
    game, con = scalar
    x = np.array([0.3])
    np.testing.assert_array_equal(perturbed_gradient(game, con, x, [0.0]), evaluate_gradient(game, x))


def test_perturbed_gradient_scalar_example():
    game = scalar_game()
    con = ConstraintSpec([[1.0]], [1.0])
    assert perturbed_gradient(game, con, np.array([0.0]), [2.0])[0] == 0.0


def test_perturbed_gradient_linear_in_alpha():
    sc = gen_dsm(DsmParams(num_players=4, dim=3), seed=3)
    rng = np.random.default_rng(0)
    x = sample_joint(sc.game, rng)
    a1, a2 = rng.normal(size=3), rng.normal(size=3)
    diff = perturbed_gradient(sc.game, sc.constraint, x, a1) - perturbed_gradient(sc.game, sc.constraint, x, a2)
    np.testing.assert_allclose(diff, -sc.constraint.a_matrix.T @ (a1 - a2), atol=1e-12)
    back = perturbed_gradient(sc.game, sc.constraint, x, a1) + sc.constraint.a_matrix.T @ a1
    g = evaluate_gradient(sc.game, x)
    assert np.max(np.abs(back - g)) <= 1e-12 * max(1.0, np.abs(g).max())


def test_constraint_violation_examples():
    con = ConstraintSpec([[1.0, 1.0]], [3.0])
    np.testing.assert_array_equal(constraint_violation(con, [1.0, 1.0]), [-1.0])
    np.testing.assert_array_equal(constraint_violation(con, [1.0, 2.0]), [0.0])
    eye = ConstraintSpec(np.eye(3), np.zeros(3))
    x = np.array([0.1, 0.2, 0.3])
    np.testing.assert_array_equal(constraint_violation(eye, x), x)


def test_dimension_errors():
    game = scalar_game()
    con = ConstraintSpec([[1.0, 1.0]], [3.0])
    with pytest.raises(InvalidInputError):
        evaluate_gradient(game, np.zeros(2))
    with pytest.raises(InvalidInputError):
        constraint_violation(con, np.zeros(3))
    with pytest.raises(InvalidInputError):
        perturbed_gradient(game, con, np.zeros(1), [0.0])
    with pytest.raises(InvalidInputError):
        ConstraintSpec([[1.0, 1.0]], [1.0, 2.0])


def test_utility_examples():
    game = scalar_game()
    x = np.array([0.5])
    assert utility(game, 0, x, [0.0]) == pytest.approx(-0.25 + 1.0)
    assert utility(game, 0, np.array([0.0]), [3.0]) == 0.0
    five = GameSpec(1, 2, [ActionSet.box([5.0, 5.0])], reward_grad=lambda x: 0 * x,
                    reward_value=lambda n, x: 5.0)
    assert utility(five, 0, np.array([2.0, 3.0]), [1.0, 1.0]) == 0.0


def test_utility_needs_reward_value():
    game = GameSpec(1, 1, [ActionSet.box([1.0])], reward_grad=lambda x: -x)
    with pytest.raises(UnsupportedOperationError):
        utility(game, 0, np.zeros(1), [0.0])


def test_game_validation():
    with pytest.raises(InvalidInputError):
        GameSpec(2, 1, [ActionSet.box([1.0])], reward_grad=lambda x: x)
    with pytest.raises(InvalidInputError):
        GameSpec(1, 2, [ActionSet.box([1.0])], reward_grad=lambda x: x)
    with pytest.raises(InvalidInputError):
        GameSpec(1, 1, [ActionSet.box([1.0])], reward_grad=lambda x: x, monotonicity_mu=-1.0)


def test_a_norm_cached_and_accurate():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 9))
    con = ConstraintSpec(a, np.zeros(4))
    sigma = np.linalg.svd(a, compute_uv=False)[0]
    assert abs(con.a_norm - sigma) <= 1e-6 * sigma
