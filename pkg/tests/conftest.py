import numpy as np
import pytest

from gamecontrol import ActionSet, ConstraintSpec, GameSpec


def scalar_game():
    """One player, r(x) = -x^2 + 2x on [0, 10], so F(x) = 2 - 2x."""
    return GameSpec(
        1, 1, [ActionSet.box([10.0])],
        reward_grad=lambda x: 2.0 - 2.0 * x,
        reward_value=lambda n, x: float(-x[0] ** 2 + 2 * x[0]),
        monotonicity_mu=2.0,
        lipschitz_L=2.0,
        name="scalar",
    )


def linear_game(matrix, offset=None, sets=None, dim=None):
    """F(x) = -M x + offset on a product of unit boxes unless ``sets`` is given."""
    m = np.asarray(matrix, dtype=float)
    size = m.shape[0]
    offset = np.zeros(size) if offset is None else np.asarray(offset, dtype=float)
    dim = dim or size
    n = size // dim
    sets = sets or [ActionSet.box(np.ones(dim)) for _ in range(n)]
    return GameSpec(n, dim, sets, reward_grad=lambda x: offset - m @ x)


class Decoupled:
    """r_n = sum_i (b_i x_n^i - q_i (x_n^i)^2 / 2) on boxes; NE is a coordinatewise clamp."""

    def __init__(self, num_players=3, dim=2, k=2, seed=0):
        rng = np.random.default_rng(seed)
        self.size = num_players * dim
        self.q = rng.uniform(1.0, 3.0, self.size)
        self.b = rng.uniform(-1.0, 4.0, self.size)
        self.upper = rng.uniform(0.5, 2.0, self.size)
        sets = [ActionSet.box(self.upper[n * dim:(n + 1) * dim]) for n in range(num_players)]
        self.game = GameSpec(
            num_players, dim, sets,
            reward_grad=lambda x: self.b - self.q * x,
            monotonicity_mu=float(self.q.min()),
            lipschitz_L=float(self.q.max()),
        )
        self.constraint = ConstraintSpec(rng.normal(size=(k, self.size)), rng.normal(size=k))

    def closed_form(self, alpha):
        beta = self.constraint.a_matrix.T @ alpha
        return np.clip((self.b - beta) / self.q, 0.0, self.upper)


@pytest.fixture
def scalar():
    return scalar_game(), ConstraintSpec([[1.0]], [1.0])


@pytest.fixture
def decoupled():
    return Decoupled()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
