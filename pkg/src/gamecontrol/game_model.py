"""Game and constraint data model.

A game is N players with d-dimensional actions stored as one contiguous
joint vector of length N*d (player n owns ``x[n*d:(n+1)*d]``). Player n's
utility is ``r_n(x) - <beta_n, x_n>`` where ``beta = A^T alpha`` and ``alpha``
is the manager's K-dimensional control input.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError
from .projection import ActionSet, stack_sets

GradFn = Callable[[np.ndarray], np.ndarray]
RewardFn = Callable[[int, np.ndarray], float]


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Immutable description of a continuous-action game.

    ``reward_grad`` maps a joint action to the stacked per-player gradients
    (the operator F). ``reward_value(n, x)`` is only needed for diagnostics.
    """

    num_players: int
    dim: int
    action_sets: Sequence[ActionSet]
    reward_grad: GradFn
    reward_value: Optional[RewardFn] = None
    monotonicity_mu: Optional[float] = None
    lipschitz_L: Optional[float] = None
    name: str = "game"

    def __post_init__(self):
        if self.num_players < 1 or self.dim < 1:
            raise InvalidInputError("need at least one player and one dimension")
        if len(self.action_sets) != self.num_players:
            raise InvalidInputError("one action set per player required")
        for s in self.action_sets:
            if s.dim != self.dim:
                raise InvalidInputError("action set dimension does not match game dim")
        if self.monotonicity_mu is not None and self.monotonicity_mu <= 0:
            raise InvalidInputError("declared mu must be positive")
        if self.lipschitz_L is not None and self.lipschitz_L <= 0:
            raise InvalidInputError("declared L must be positive")
        object.__setattr__(self, "action_sets", tuple(self.action_sets))

    @property
    def size(self) -> int:
        return self.num_players * self.dim

    @cached_property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``(upper (N, d), cap (N,))`` arrays of the action sets."""
        upper, cap = stack_sets(self.action_sets)
        upper.setflags(write=False)
        cap.setflags(write=False)
        return upper, cap

    def blocks(self, x: np.ndarray) -> np.ndarray:
        """View a joint vector as an (N, d) array of per-player blocks."""
        return check_joint(self, x).reshape(self.num_players, self.dim)

    def contains(self, x, tol: float = 1e-10) -> bool:
        xb = self.blocks(x)
        upper, cap = self.bounds
        return bool((xb >= -tol).all() and (xb <= upper + tol).all()
                    and (xb.sum(axis=1) <= cap + tol).all())


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Target linear constraints ``A x = target`` with A of shape (K, N*d)."""

    a_matrix: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        a = np.array(self.a_matrix, dtype=float, ndmin=2)
        ell = np.atleast_1d(np.array(self.target, dtype=float))
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidInputError("A must be a non-empty matrix")
        if ell.shape != (a.shape[0],):
            raise InvalidInputError(f"target has shape {ell.shape}, A has {a.shape[0]} rows")
        if not (np.isfinite(a).all() and np.isfinite(ell).all()):
            raise InvalidInputError("A and target must be finite")
        a.setflags(write=False)
        ell.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "target", ell)

    @property
    def num_constraints(self) -> int:
        return self.a_matrix.shape[0]

    @cached_property
    def a_norm(self) -> float:
        from .ne_oracle import operator_norm

        return operator_norm(self.a_matrix)

    def check_game(self, game: GameSpec) -> None:
        if self.a_matrix.shape[1] != game.size:
            raise InvalidInputError(
                f"A has {self.a_matrix.shape[1]} columns but the game has {game.size} coordinates"
            )


@dataclass
class ControlState:
    """Joint action, control input and turn counter of a running system."""

    x: np.ndarray
    alpha: np.ndarray
    t: int = 0

    def copy(self) -> "ControlState":
        return ControlState(self.x.copy(), self.alpha.copy(), self.t)


def check_joint(game: GameSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (game.size,):
        raise InvalidInputError(f"joint action has shape {x.shape}, expected ({game.size},)")
    return x


def _check_alpha(constraint: ConstraintSpec, alpha) -> np.ndarray:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (constraint.num_constraints,):
        raise InvalidInputError(
            f"alpha has shape {alpha.shape}, expected ({constraint.num_constraints},)"
        )
    return alpha


def evaluate_gradient(game: GameSpec, x) -> np.ndarray:
    """Stacked reward gradients F(x) = (grad_{x_1} r_1, ..., grad_{x_N} r_N)."""
    x = check_joint(game, x)
    g = np.asarray(game.reward_grad(x), dtype=float)
    if g.shape != (game.size,):
        raise InvalidInputError(f"gradient evaluator returned shape {g.shape}")
    return g


def control_coefficients(constraint: ConstraintSpec, alpha) -> np.ndarray:
    """beta = A^T alpha; player n's coefficients are its d entries."""
    return constraint.a_matrix.T @ _check_alpha(constraint, alpha)


def perturbed_gradient(game: GameSpec, constraint: ConstraintSpec, x, alpha) -> np.ndarray:
    """F(x, alpha) = F(x) - A^T alpha."""
    constraint.check_game(game)
    return evaluate_gradient(game, x) - control_coefficients(constraint, alpha)


def constraint_violation(constraint: ConstraintSpec, x) -> np.ndarray:
    """A x - target: the only signal the manager gets to see."""
    x = np.asarray(x, dtype=float)
    if x.shape != (constraint.a_matrix.shape[1],):
        raise InvalidInputError(
            f"joint action has shape {x.shape}, A has {constraint.a_matrix.shape[1]} columns"
        )
    return constraint.a_matrix @ x - constraint.target


def utility(game: GameSpec, n: int, x, beta_n) -> float:
    """r_n(x) - <beta_n, x_n>. Diagnostics only; the dynamics never need it."""
    if game.reward_value is None:
        raise UnsupportedOperationError(f"game {game.name!r} has no reward_value evaluator")
    if not 0 <= n < game.num_players:
        raise InvalidInputError(f"player index {n} out of range")
    x = check_joint(game, x)
    beta_n = np.asarray(beta_n, dtype=float)
    if beta_n.shape != (game.dim,):
        raise InvalidInputError("beta_n must have length d")
    x_n = x[n * game.dim:(n + 1) * game.dim]
    return float(game.reward_value(n, x)) - float(beta_n @ x_n)
