"""Two-timescale game control dynamics.

Each turn t >= 1:

1. the manager observes v = A x_{t-1} - target;
2. every player takes a projected noisy gradient step
   ``x_n <- Proj(x_n + eta_{t-1} * (grad_n r_n(x) + noise - (A^T alpha_{t-1})_n))``;
3. the manager sets ``alpha_t = alpha_{t-1} + eps_{t-1} * v`` and broadcasts it.

Players move on the fast timescale eta_t, the manager on the slow one eps_t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import DivergedRunError, InvalidInputError, TimescaleConditionError
from .game_model import ConstraintSpec, ControlState, GameSpec
from .projection import project_blocks

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e9
MODES = ("controlled", "uncontrolled", "direct-global")


@dataclass(frozen=True)
class StepSchedule:
    """Power-law step sizes eta_t = (t + T1)^-eta_power, eps_t = (t + T2)^-eps_power.

    The default schedule (0.5, 0.75) sits exactly on the boundary
    of the square-summability and 2*eps > 3*eta conditions; boundary values are
    accepted (and logged), anything strictly outside is rejected.
    """

    eta_power: float = 0.5
    eta_offset: float = 1.0
    eps_power: float = 0.75
    eps_offset: float = 1.0

    def __post_init__(self):
        for name in ("eta_power", "eps_power"):
            p = getattr(self, name)
            if not 0.5 <= p <= 1.0:
                raise TimescaleConditionError(
                    f"timescale condition: {name}={p} must lie in [0.5, 1] (square summable, non-summable)"
                )
        if self.eta_offset <= 0 or self.eps_offset <= 0:
            raise InvalidInputError("step offsets T1, T2 must be positive")
        if 2 * self.eps_power < 3 * self.eta_power:
            raise TimescaleConditionError(
                f"timescale condition 2*eps > 3*eta violated: "
                f"2*{self.eps_power} = {2 * self.eps_power} <= 3*{self.eta_power} = {3 * self.eta_power}"
            )
        if self.eta_power == 0.5 or 2 * self.eps_power == 3 * self.eta_power:
            log.info(
                "step schedule (eta=%s, eps=%s) is on the boundary of the timescale conditions",
                self.eta_power, self.eps_power,
            )

    def etas(self, horizon: int) -> np.ndarray:
        return (np.arange(horizon, dtype=float) + self.eta_offset) ** -self.eta_power

    def epss(self, horizon: int) -> np.ndarray:
        return (np.arange(horizon, dtype=float) + self.eps_offset) ** -self.eps_power


def step_sizes(schedule: StepSchedule, t: int) -> tuple[float, float]:
    if t < 0:
        raise InvalidInputError("turn index must be >= 0")
    eta = (t + schedule.eta_offset) ** -schedule.eta_power
    eps = (t + schedule.eps_offset) ** -schedule.eps_power
    return float(eta), float(eps)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean i.i.d. Gaussian gradient noise; sigma = 0 means noiseless."""

    sigma: float = 0.5

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidInputError("noise sigma must be >= 0")

    @property
    def kind(self) -> str:
        return "gaussian" if self.sigma > 0 else "none"

    def second_moment_bound(self, size: int) -> float:
        return size * self.sigma**2


def sample_noise(noise: NoiseModel, size: int, rng: np.random.Generator) -> np.ndarray:
    if noise.sigma == 0:
        return np.zeros(size)
    return rng.normal(0.0, noise.sigma, size)


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for realization ``index``, reproducible on its own."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def player_update(
    state: ControlState,
    game: GameSpec,
    constraint: ConstraintSpec,
    schedule: StepSchedule,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """One synchronous round of projected noisy gradient ascent at turn state.t + 1."""
    eta, _ = step_sizes(schedule, state.t)
    beta = constraint.a_matrix.T @ state.alpha
    g = game.reward_grad(state.x) + sample_noise(noise, game.size, rng)
    upper, cap = game.bounds
    y = state.x + eta * (g - beta)
    return project_blocks(y.reshape(upper.shape), upper, cap).ravel()


def manager_update(alpha, violation, eps: float) -> np.ndarray:
    """alpha + eps * violation, with no projection or clipping."""
    return np.asarray(alpha, dtype=float) + eps * np.asarray(violation, dtype=float)


@dataclass
class RecordOptions:
    """What to keep from a run.

    ``stride`` records every stride-th turn; ``times`` adds explicit turns.
    ``snapshot_times`` additionally stores x_t and alpha_t (for post-hoc NE gaps).
    """

    stride: int = 1
    times: Sequence[int] = ()
    keep_alpha: bool = False
    snapshot_times: Sequence[int] = ()
    observers: Mapping[str, Callable[[np.ndarray], float]] = field(default_factory=dict)


@dataclass
class Trajectory:
    t: np.ndarray
    violation_sq: np.ndarray
    final_state: ControlState
    mode: str = "controlled"
    alpha: Optional[np.ndarray] = None
    observed: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    ne_gap: Optional[np.ndarray] = None


def initial_state(
    game: GameSpec,
    constraint: ConstraintSpec,
    rng: np.random.Generator,
    alpha_range=(0.0, 2.0),
    x_range=(0.0, 0.1),
) -> ControlState:
    """alpha_0 ~ U[alpha_range]^K and x_0 ~ U[x_range]^{Nd}, projected into the action sets."""
    alpha0 = rng.uniform(alpha_range[0], alpha_range[1], constraint.num_constraints)
    x0 = rng.uniform(x_range[0], x_range[1], game.size)
    upper, cap = game.bounds
    x0 = project_blocks(x0.reshape(upper.shape), upper, cap).ravel()
    return ControlState(x0, alpha0, 0)


def _record_mask(horizon, record: RecordOptions):
    if record.stride < 1:
        raise InvalidInputError("record stride must be >= 1")
    mask = np.zeros(horizon + 1, dtype=bool)
    mask[record.stride::record.stride] = True
    for t in list(record.times) + list(record.snapshot_times):
        if not 1 <= t <= horizon:
            raise InvalidInputError(f"record time {t} outside [1, {horizon}]")
        mask[t] = True
    return mask


def run_trajectory(
    game: GameSpec,
    constraint: ConstraintSpec,
    schedule: StepSchedule,
    noise: NoiseModel,
    horizon: int,
    seed,
    record: RecordOptions | None = None,
    mode: str = "controlled",
    objective_grad: Callable[[np.ndarray], np.ndarray] | None = None,
    x0=None,
    alpha0=None,
    init_alpha_range=(0.0, 2.0),
    init_x_range=(0.0, 0.1),
) -> Trajectory:
    """Run ``horizon`` turns of the control loop and record observables.

    ``seed`` is an int (used as a realization-0 stream) or a Generator. The
    initial draws happen in every mode, so modes share x_0 and the noise
    stream. ``uncontrolled`` pins alpha to zero; ``direct-global`` makes the
    players descend ``objective_grad`` instead of their own rewards.
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    if mode not in MODES:
        raise InvalidInputError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "direct-global" and objective_grad is None:
        raise InvalidInputError("direct-global mode needs objective_grad")
    constraint.check_game(game)
    record = record or RecordOptions()
    rng = seed if isinstance(seed, np.random.Generator) else realization_rng(int(seed), 0)

    state = initial_state(game, constraint, rng, init_alpha_range, init_x_range)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if not game.contains(x0):
            raise InvalidInputError("x0 must lie in the action set")
        state.x = x0.copy()
    if alpha0 is not None:
        state.alpha = np.atleast_1d(np.asarray(alpha0, dtype=float)).copy()
    if mode != "controlled":
        state.alpha = np.zeros(constraint.num_constraints)

    a, ell = constraint.a_matrix, constraint.target
    a_t = np.ascontiguousarray(a.T)
    upper, cap = game.bounds
    shape = upper.shape
    size = game.size
    sigma = noise.sigma
    etas, epss = schedule.etas(horizon), schedule.epss(horizon)
    grad = game.reward_grad
    mask = _record_mask(horizon, record)
    snap = np.zeros(horizon + 1, dtype=bool)
    snap[list(record.snapshot_times)] = True

    n_rec = int(mask.sum())
    t_rec = np.empty(n_rec, dtype=np.int64)
    v_rec = np.empty(n_rec)
    alpha_rec = np.empty((n_rec, a.shape[0])) if record.keep_alpha else None
    observed = {name: np.empty(n_rec) for name in record.observers}
    snapshots = {}

    x, alpha = state.x, state.alpha
    beta = a_t @ alpha
    k = 0
    for t in range(1, horizon + 1):
        v = a @ x - ell
        eta = etas[t - 1]
        m = rng.normal(0.0, sigma, size) if sigma > 0 else 0.0
        if mode == "direct-global":
            y = x + eta * (m - objective_grad(x))
        else:
            y = x + eta * (grad(x) + m - beta)
        x = project_blocks(y.reshape(shape), upper, cap).ravel()
        if mode == "controlled":
            alpha = alpha + epss[t - 1] * v
            beta = a_t @ alpha
        xmax = np.abs(x).max()
        amax = np.abs(alpha).max() if alpha.size else 0.0
        if not (xmax < DIVERGENCE_BOUND and amax < DIVERGENCE_BOUND):
            raise DivergedRunError(f"state left the bounded region at turn {t}", last_finite_t=t - 1)
        if mask[t]:
            viol = a @ x - ell
            t_rec[k] = t
            v_rec[k] = viol @ viol
            if alpha_rec is not None:
                alpha_rec[k] = alpha
            for name, fn in record.observers.items():
                observed[name][k] = fn(x)
            if snap[t]:
                snapshots[t] = (x.copy(), alpha.copy())
            k += 1

    final = ControlState(x, alpha, horizon)
    return Trajectory(t_rec, v_rec, final, mode, alpha_rec, observed, snapshots)
