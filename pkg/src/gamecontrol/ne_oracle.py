"""Reference Nash equilibrium solver and the averaged control map.

For a fixed control input ``alpha`` the equilibrium x*(alpha) is the unique
fixed point of ``x -> Proj_X(x + tau * F(x, alpha))``. With ``tau = mu / L**2``
that map is a contraction, so plain projected-gradient iteration converges
linearly. The natural-map residual ``||x - Proj_X(x + tau F(x, alpha))||``
certifies the answer independently of how it was reached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NoConvergenceError
from .game_model import ConstraintSpec, GameSpec, check_joint, control_coefficients
from .projection import project_blocks


def operator_norm(a_matrix, tol: float = 1e-8, max_iter: int = 100_000) -> float:
    """Largest singular value of ``a_matrix`` by power iteration on A^T A.

    Starts from the normalised all-ones vector; if that happens to lie in the
    null space, restarts from the largest column of A^T A.
    """
    a = np.array(a_matrix, dtype=float, ndmin=2)
    if a.size == 0:
        raise InvalidInputError("operator norm of an empty matrix")
    if not np.isfinite(a).all():
        raise InvalidInputError("matrix must be finite")
    if not a.any():
        return 0.0
    v = np.ones(a.shape[1]) / np.sqrt(a.shape[1])
    w = a.T @ (a @ v)
    if np.linalg.norm(w) <= 1e-14 * np.abs(a).max() ** 2:
        ata_cols = np.linalg.norm(a, axis=0)
        v = a.T @ a[:, int(np.argmax(ata_cols))]
        v /= np.linalg.norm(v)
        w = a.T @ (a @ v)
    lam = float(v @ w)
    for _ in range(max_iter):
        v = w / np.linalg.norm(w)
        w = a.T @ (a @ v)
        lam_new = float(v @ w)
        # the eigenvalue error is the per-step change over the spectral gap, so stop well below tol
        if abs(lam_new - lam) <= 1e-5 * tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))


def compute_gamma(mu: float, a_norm: float) -> float:
    """gamma = min(mu / ||A||^2, 1), which keeps 2 mu gamma - gamma^2 ||A||^2 > 0."""
    if not (mu > 0 and a_norm > 0):
        raise InvalidInputError("mu and ||A|| must be positive")
    return min(mu / a_norm**2, 1.0)


@dataclass(frozen=True)
class GMapParams:
    gamma: float
    mu: float
    a_norm: float

    def __post_init__(self):
        if not 2 * self.mu * self.gamma - self.gamma**2 * self.a_norm**2 > 0:
            raise InvalidInputError(
                f"gamma={self.gamma} violates 2*mu*gamma - gamma^2*||A||^2 > 0"
            )

    @classmethod
    def from_constants(cls, mu: float, a_norm: float) -> "GMapParams":
        return cls(compute_gamma(mu, a_norm), mu, a_norm)


@dataclass
class NeSolution:
    x_star: np.ndarray
    residual: float
    iterations: int
    step: float


def _resolve_step(game, mu, lipschitz, step):
    if step is not None:
        if not step > 0:
            raise InvalidInputError("step must be positive")
        return float(step)
    mu = game.monotonicity_mu if mu is None else mu
    lipschitz = game.lipschitz_L if lipschitz is None else lipschitz
    if mu is None or lipschitz is None:
        raise InvalidInputError(
            "solver step needs mu and L; declare them on the game or estimate them first"
        )
    if not (mu > 0 and lipschitz > 0):
        raise InvalidInputError(f"need mu > 0 and L > 0, got mu={mu}, L={lipschitz}")
    return mu / lipschitz**2


def solve_ne(
    game: GameSpec,
    constraint: ConstraintSpec,
    alpha,
    tol: float = 1e-9,
    max_iter: int = 1_000_000,
    x0=None,
    step: float | None = None,
    mu: float | None = None,
    lipschitz: float | None = None,
) -> NeSolution:
    """Equilibrium of the game under control ``alpha`` by projected gradient.

    The step defaults to ``mu / L**2`` from the arguments or the game's
    declared constants. A larger explicit ``step`` is accepted; if the
    iteration then blows up the step is halved and restarted from the best
    point seen.
    """
    constraint.check_game(game)
    tau = _resolve_step(game, mu, lipschitz, step)
    beta = control_coefficients(constraint, alpha)
    upper, cap = game.bounds
    shape = upper.shape
    if x0 is None:
        x = np.zeros(game.size)
    else:
        x = project_blocks(check_joint(game, x0).reshape(shape), upper, cap).ravel()

    best_r, best_x = np.inf, x
    for it in range(1, max_iter + 1):
        g = game.reward_grad(x) - beta
        if not np.isfinite(g).all():
            raise InvalidInputError("non-finite gradient inside the NE solver")
        xn = project_blocks((x + tau * g).reshape(shape), upper, cap).ravel()
        r = float(np.linalg.norm(xn - x))
        if r <= tol:
            return NeSolution(x, r, it, tau)
        if r < best_r:
            best_r, best_x = r, x
        elif r > 1e6 * best_r:
            tau *= 0.5
            best_r, xn = np.inf, best_x
        x = xn
    raise NoConvergenceError(
        f"NE solver did not reach tol={tol} in {max_iter} iterations (best residual {best_r:.3e})",
        best_residual=best_r,
        x_best=best_x,
    )


def g_map(
    game: GameSpec,
    constraint: ConstraintSpec,
    alpha,
    params: GMapParams,
    tol: float = 1e-9,
    **solver_kwargs,
) -> np.ndarray:
    """alpha + gamma * (A x*(alpha) - target); its fixed points put the NE on target."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    solver_kwargs.setdefault("mu", params.mu)
    sol = solve_ne(game, constraint, alpha, tol=tol, **solver_kwargs)
    return alpha + params.gamma * (constraint.a_matrix @ sol.x_star - constraint.target)
