"""Seeded scenario generators: weighted resource allocation (DSM) and quadratic games.

Distribution parameters are given as (mean, variance) pairs and sampled with
standard deviation sqrt(variance).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError
from .game_model import ConstraintSpec, GameSpec, check_joint
from .projection import ActionSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DsmParams:
    num_players: int = 1000
    dim: int = 24
    upper_mean: float = 1.5
    upper_var: float = 0.5
    cap_mean: float = 5.0
    cap_var: float = 1.0
    omega_mean: float = 1.5
    omega_var: float = 0.5
    weight_mean: float = 1.0
    weight_var: float = 0.2
    target_mean: float = 35.0
    target_var: float = 5.0
    floor: float = 0.05

    def __post_init__(self):
        if self.num_players < 1 or self.dim < 1:
            raise InvalidInputError("DSM needs N >= 1 and d >= 1")
        if self.floor <= 0:
            raise InvalidInputError("truncation floor must be positive")


@dataclass(frozen=True)
class QuadParams:
    num_players: int = 100
    dim: int = 5
    rank_deficit: int = 5
    cap: float = 10.0
    q_sign: int = -1
    rho_var: float = 0.5
    c_var: float = 0.5

    def __post_init__(self):
        if self.num_players < 1 or self.dim < 1:
            raise InvalidInputError("quadratic game needs N >= 1 and d >= 1")
        if not 0 <= self.rank_deficit < self.num_players * self.dim:
            raise InvalidInputError("rank deficit must be in [0, N*d)")
        if self.q_sign not in (-1, 1):
            raise InvalidInputError("q_sign must be -1 or +1")
        if self.cap <= 0:
            raise InvalidInputError("cap must be positive")


class DsmGradient:
    """Closed-form gradient of r_n = sum_i w x - 0.3 x^2 - 0.01 x s_i^2, s_i = sum_n a x."""

    def __init__(self, weights, omega):
        self.weights = weights
        self.omega = omega

    def __call__(self, x):
        xb = x.reshape(self.weights.shape)
        s = (self.weights * xb).sum(axis=0)
        return (self.omega - 0.6 * xb - 0.01 * s**2 - 0.02 * xb * s * self.weights).ravel()


class DsmReward:
    def __init__(self, weights, omega):
        self.weights = weights
        self.omega = omega

    def __call__(self, n, x):
        xb = x.reshape(self.weights.shape)
        s = (self.weights * xb).sum(axis=0)
        xn = xb[n]
        return float(np.sum(self.omega[n] * xn - 0.3 * xn**2 - 0.01 * xn * s**2))


class QuadGradient:
    """Player n's block of grad r_n for r_n = x^T Q_n x + c_n^T x_n, stacked as J x + c."""

    def __init__(self, jac, c):
        self.jac = jac
        self.c = c

    def __call__(self, x):
        return self.jac @ x + self.c


class QuadReward:
    def __init__(self, q, c, dim):
        self.q = q
        self.c = c
        self.dim = dim

    def __call__(self, n, x):
        d = self.dim
        return float(x @ self.q[n] @ x + self.c[n * d:(n + 1) * d] @ x[n * d:(n + 1) * d])


@dataclass(eq=False)
class Scenario:
    """A generated game, its target constraints and every array that defines them."""

    kind: str
    seed: int
    params: object
    game: GameSpec
    constraint: ConstraintSpec
    arrays: dict = field(repr=False)
    info: dict = field(default_factory=dict)

    @cached_property
    def q_sum(self) -> np.ndarray:
        return self.arrays["Q"].sum(axis=0)

    def objective_grad(self, x):
        """grad Phi = 2 G x + rho (quadratic scenarios only)."""
        if self.kind != "quadratic":
            raise InvalidInputError("global objective is only defined for quadratic scenarios")
        return 2.0 * (self.arrays["G"] @ x) + self.arrays["rho"]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "params": asdict(self.params),
            "arrays": {k: v.tolist() for k, v in self.arrays.items()},
            "info": self.info,
        }

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        arrays = {k: np.asarray(v, dtype=float) for k, v in data["arrays"].items()}
        if data["kind"] == "dsm":
            return _build_dsm(DsmParams(**data["params"]), data["seed"], arrays)
        if data["kind"] == "quadratic":
            return _build_quadratic(QuadParams(**data["params"]), data["seed"], arrays)
        raise InvalidInputError(f"unknown scenario kind {data['kind']!r}")

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _truncated(rng, mean, var, size, floor, label):
    v = rng.normal(mean, np.sqrt(var), size)
    low = v < floor
    if low.any():
        log.info("truncated %d sampled %s values at floor %g", int(low.sum()), label, floor)
    return np.maximum(v, floor)


def gen_dsm(params: DsmParams = DsmParams(), seed: int = 0) -> Scenario:
    """Weighted resource allocation game with per-resource target loads.

    Player n owns x_n in {0 <= x_n^i <= upper_n^i, sum_i x_n^i <= cap_n}; resource
    i's weighted load is s_i = sum_n a_{n,i} x_n^i and its target is ell_i.
    """
    rng = _rng(seed)
    shape = (params.num_players, params.dim)
    p = params
    arrays = {
        "upper": _truncated(rng, p.upper_mean, p.upper_var, shape, p.floor, "upper"),
        "cap": _truncated(rng, p.cap_mean, p.cap_var, p.num_players, p.floor, "cap"),
        "omega": rng.normal(p.omega_mean, np.sqrt(p.omega_var), shape),
        "weights": _truncated(rng, p.weight_mean, p.weight_var, shape, p.floor, "weight"),
        "target": _truncated(rng, p.target_mean, p.target_var, p.dim, p.floor, "target"),
    }
    return _build_dsm(params, seed, arrays)


def _build_dsm(params: DsmParams, seed: int, arrays: dict) -> Scenario:
    n_players, d = params.num_players, params.dim
    weights, omega = arrays["weights"], arrays["omega"]
    sets = [ActionSet.capped_box(arrays["upper"][n], arrays["cap"][n]) for n in range(n_players)]
    a = np.zeros((d, n_players * d))
    for i in range(d):
        a[i, np.arange(n_players) * d + i] = weights[:, i]
    game = GameSpec(
        n_players, d, sets,
        reward_grad=DsmGradient(weights, omega),
        reward_value=DsmReward(weights, omega),
        name=f"dsm(N={n_players}, d={d}, seed={seed})",
    )
    constraint = ConstraintSpec(a, arrays["target"])
    return Scenario("dsm", seed, params, game, constraint, arrays)


def gen_quadratic(params: QuadParams = QuadParams(), seed: int = 0) -> Scenario:
    """Quadratic game r_n = x^T Q_n x + c_n^T x_n steered to a stationary point of Phi.

    Phi(x) = x^T G x + rho^T x with G = H0 H0^T, so the targets are A = 2G and
    ell = -rho. Q_n = q_sign * H_n H_n^T; q_sign = -1 makes each reward concave.
    """
    rng = _rng(seed)
    size = params.num_players * params.dim
    h0 = rng.standard_normal((size, size - params.rank_deficit))
    rho = rng.normal(0.0, np.sqrt(params.rho_var), size)
    q = np.empty((params.num_players, size, size))
    for n in range(params.num_players):
        h = rng.standard_normal((size, size))
        q[n] = params.q_sign * (h @ h.T)
    c = rng.normal(0.0, np.sqrt(params.c_var), size)
    arrays = {"G": h0 @ h0.T, "rho": rho, "Q": q, "c": c}
    return _build_quadratic(params, seed, arrays)


def _build_quadratic(params: QuadParams, seed: int, arrays: dict) -> Scenario:
    n_players, d = params.num_players, params.dim
    size = n_players * d
    q, c = arrays["Q"], arrays["c"]
    jac = np.empty((size, size))
    for n in range(n_players):
        rows = slice(n * d, (n + 1) * d)
        jac[rows] = q[n][rows] + q[n].T[rows]
    # F is linear, so the monotonicity and Lipschitz constants are exact
    mu = float(-np.linalg.eigvalsh(0.5 * (jac + jac.T)).max())
    lip = float(np.linalg.norm(jac, 2))
    if mu <= 0:
        log.warning("quadratic game (seed=%d) is not strongly monotone: mu = %.4g", seed, mu)
    sets = [ActionSet.capped_simplex(params.cap, d) for _ in range(n_players)]
    game = GameSpec(
        n_players, d, sets,
        reward_grad=QuadGradient(jac, c),
        reward_value=QuadReward(q, c, d),
        monotonicity_mu=mu if mu > 0 else None,
        lipschitz_L=lip if lip > 0 else None,
        name=f"quadratic(N={n_players}, d={d}, seed={seed})",
    )
    constraint = ConstraintSpec(2.0 * arrays["G"], -arrays["rho"])
    info = {"mu_exact": mu, "lipschitz_exact": lip}
    return Scenario("quadratic", seed, params, game, constraint, arrays, info)


def global_cost(scenario: Scenario, x) -> float:
    """Phi(x) = x^T G x + rho^T x."""
    if scenario.kind != "quadratic":
        raise InvalidInputError("global cost is only defined for quadratic scenarios")
    x = check_joint(scenario.game, x)
    return float(x @ scenario.arrays["G"] @ x + scenario.arrays["rho"] @ x)


def sum_rewards(scenario: Scenario, x) -> float:
    """Sum over players of r_n(x)."""
    game = scenario.game
    if game.reward_value is None:
        raise UnsupportedOperationError("scenario has no reward evaluator")
    x = check_joint(game, x)
    if scenario.kind == "quadratic":
        return float(x @ scenario.q_sum @ x + scenario.arrays["c"] @ x)
    if scenario.kind == "dsm":
        w, om = scenario.arrays["weights"], scenario.arrays["omega"]
        xb = x.reshape(w.shape)
        s = (w * xb).sum(axis=0)
        return float(np.sum(om * xb - 0.3 * xb**2 - 0.01 * xb * s**2))
    return float(sum(game.reward_value(n, x) for n in range(game.num_players)))


def make_scenario(kind: str, params: dict | None = None, seed: int = 0) -> Scenario:
    params = params or {}
    try:
        if kind == "dsm":
            return gen_dsm(DsmParams(**params), seed)
        if kind == "quadratic":
            return gen_quadratic(QuadParams(**params), seed)
    except TypeError as exc:
        raise InvalidInputError(f"bad {kind} scenario params: {exc}") from exc
    raise InvalidInputError(f"unknown scenario kind {kind!r}")
