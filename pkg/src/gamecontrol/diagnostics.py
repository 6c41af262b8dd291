"""Empirical checks of the structural assumptions and convergence behaviour.

Sampled inequalities are reported as a worst-case margin (largest value of
``lhs - rhs``); a check passes when that margin is at most its tolerance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .game_model import ConstraintSpec, GameSpec, evaluate_gradient
from .ne_oracle import GMapParams, g_map, solve_ne
from .projection import project_blocks

INEQ_TOL = 1e-6


@dataclass
class PropertyReport:
    name: str
    samples: int
    worst_margin: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst margin {self.worst_margin:.3e} (tol {self.tolerance:g}, n={self.samples})"


@dataclass
class RateFit:
    t_min: float
    t_max: float
    slope: float
    intercept: float
    r2: float
    points: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Aggregate:
    """Pointwise mean and sample standard deviation (n - 1) over realizations."""

    t: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    count: int
    observed: dict = field(default_factory=dict)


def sample_joint(game: GameSpec, rng: np.random.Generator) -> np.ndarray:
    """A point of the product action set: uniform on the bounding box, then projected."""
    upper, cap = game.bounds
    hi = np.minimum(upper, cap[:, None])
    hi = np.where(np.isfinite(hi), hi, 1.0)
    p = rng.uniform(0.0, 1.0, upper.shape) * hi
    return project_blocks(p, upper, cap).ravel()


def _sample_pairs(game, num_samples, rng):
    for _ in range(num_samples):
        while True:
            x, y = sample_joint(game, rng), sample_joint(game, rng)
            if np.linalg.norm(y - x) >= 1e-12:
                break
        yield x, y


def estimate_monotonicity(game: GameSpec, num_samples: int, rng: np.random.Generator) -> float:
    """mu_hat = min over sampled pairs of -<y - x, F(y) - F(x)> / ||y - x||^2.

    Being a minimum over a finite sample, mu_hat can only overshoot the true
    constant; it never grows when more pairs are drawn from the same stream.
    """
    if num_samples < 2:
        raise InvalidInputError("need at least 2 sample pairs")
    worst = np.inf
    for x, y in _sample_pairs(game, num_samples, rng):
        dx = y - x
        ratio = -float(dx @ (evaluate_gradient(game, y) - evaluate_gradient(game, x))) / float(dx @ dx)
        worst = min(worst, ratio)
    return worst


def estimate_lipschitz(game: GameSpec, num_samples: int, rng: np.random.Generator) -> float:
    """L_hat = max over sampled pairs of ||F(y) - F(x)|| / ||y - x||."""
    if num_samples < 2:
        raise InvalidInputError("need at least 2 sample pairs")
    best = 0.0
    for x, y in _sample_pairs(game, num_samples, rng):
        dx = y - x
        ratio = float(np.linalg.norm(evaluate_gradient(game, y) - evaluate_gradient(game, x)))
        best = max(best, ratio / float(np.linalg.norm(dx)))
    return best


def monotonicity_report(game: GameSpec, num_samples: int, rng: np.random.Generator) -> PropertyReport:
    mu_hat = estimate_monotonicity(game, num_samples, rng)
    return PropertyReport(
        "strong monotonicity", num_samples, -mu_hat, 0.0, bool(mu_hat > 0), {"mu_hat": mu_hat}
    )


def _alpha_pairs(constraint, num_pairs, alpha_range, rng, pairs):
    if pairs is not None:
        return [(np.atleast_1d(np.asarray(a1, float)), np.atleast_1d(np.asarray(a2, float)))
                for a1, a2 in pairs]
    k = constraint.num_constraints
    return [
        (rng.uniform(-alpha_range, alpha_range, k), rng.uniform(-alpha_range, alpha_range, k))
        for _ in range(num_pairs)
    ]


class _NeCache:
    def __init__(self, game, constraint, tol, solver_kwargs):
        self.game, self.constraint = game, constraint
        self.tol = tol
        self.kwargs = solver_kwargs
        self.store = {}

    def __call__(self, alpha):
        key = alpha.tobytes()
        if key not in self.store:
            self.store[key] = solve_ne(self.game, self.constraint, alpha, tol=self.tol, **self.kwargs).x_star
        return self.store[key]


def check_g_nonexpansive(
    game: GameSpec,
    constraint: ConstraintSpec,
    params: GMapParams,
    num_pairs: int = 200,
    alpha_range: float = 5.0,
    rng: np.random.Generator | None = None,
    pairs: Sequence | None = None,
    tol: float = INEQ_TOL,
    solver_tol: float = 1e-9,
    **solver_kwargs,
) -> PropertyReport:
    """Worst ||g(a2) - g(a1)|| - ||a2 - a1|| over sampled control pairs."""
    rng = rng if rng is not None else np.random.default_rng(0)
    solver_kwargs.setdefault("mu", params.mu)
    worst = -np.inf
    samples = _alpha_pairs(constraint, num_pairs, alpha_range, rng, pairs)
    for a1, a2 in samples:
        g1 = g_map(game, constraint, a1, params, tol=solver_tol, **solver_kwargs)
        g2 = g_map(game, constraint, a2, params, tol=solver_tol, **solver_kwargs)
        worst = max(worst, float(np.linalg.norm(g2 - g1) - np.linalg.norm(a2 - a1)))
    return PropertyReport(
        "g-map non-expansive", len(samples), worst, tol, bool(worst <= tol),
        {"gamma": params.gamma, "mu": params.mu, "a_norm": params.a_norm},
    )


def check_cocoercivity(
    game: GameSpec,
    constraint: ConstraintSpec,
    num_pairs: int = 200,
    alpha_range: float = 5.0,
    mu_hat: float | None = None,
    rng: np.random.Generator | None = None,
    pairs: Sequence | None = None,
    tol: float = INEQ_TOL,
    solver_tol: float = 1e-9,
    **solver_kwargs,
) -> PropertyReport:
    """Worst <A dx*, da> + mu_hat ||dx*||^2 over sampled control pairs."""
    rng = rng if rng is not None else np.random.default_rng(0)
    mu_hat = game.monotonicity_mu if mu_hat is None else mu_hat
    if mu_hat is None or not mu_hat > 0:
        raise InvalidInputError("co-coercivity check needs a positive mu_hat")
    solver_kwargs.setdefault("mu", mu_hat)
    ne = _NeCache(game, constraint, solver_tol, solver_kwargs)
    worst = -np.inf
    samples = _alpha_pairs(constraint, num_pairs, alpha_range, rng, pairs)
    for a1, a2 in samples:
        dx = ne(a2) - ne(a1)
        margin = float((constraint.a_matrix @ dx) @ (a2 - a1)) + mu_hat * float(dx @ dx)
        worst = max(worst, margin)
    return PropertyReport(
        "NE co-coercivity", len(samples), worst, tol, bool(worst <= tol), {"mu_hat": mu_hat}
    )


def check_ne_lipschitz(
    game: GameSpec,
    constraint: ConstraintSpec,
    num_pairs: int = 200,
    alpha_range: float = 5.0,
    rng: np.random.Generator | None = None,
    pairs: Sequence | None = None,
    solver_tol: float = 1e-9,
    **solver_kwargs,
) -> PropertyReport:
    """Largest ||x*(a2) - x*(a1)|| / ||a2 - a1||; informational, always passes.

    Identical pairs are skipped.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    ne = _NeCache(game, constraint, solver_tol, solver_kwargs)
    ratios = []
    for a1, a2 in _alpha_pairs(constraint, num_pairs, alpha_range, rng, pairs):
        da = float(np.linalg.norm(a2 - a1))
        if da == 0:
            continue
        ratios.append(float(np.linalg.norm(ne(a2) - ne(a1))) / da)
    l0 = max(ratios) if ratios else 0.0
    return PropertyReport(
        "NE Lipschitz in control", len(ratios), l0, np.inf, True, {"L0_hat": l0}
    )


def fit_rate(t, values, window, num_points: int = 20) -> RateFit:
    """Least-squares slope of log(values) against log(t) at log-spaced t in ``window``."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    t_min, t_max = float(window[0]), float(window[1])
    if not t_min < t_max:
        raise InvalidInputError("window must satisfy t_min < t_max")
    inside = (t >= t_min) & (t <= t_max)
    if (values[inside] <= 0).any():
        raise InvalidInputError("series must be positive on the fit window")
    ts, vs = t[inside], values[inside]
    if ts.size == 0:
        raise InvalidInputError("no data inside the fit window")
    targets = np.geomspace(max(t_min, ts.min()), min(t_max, ts.max()), num_points)
    idx = np.unique([int(np.argmin(np.abs(np.log(ts) - np.log(g)))) for g in targets])
    if idx.size < 10:
        raise InvalidInputError(f"only {idx.size} distinct log-spaced points in window; need >= 10")
    lx, ly = np.log(ts[idx]), np.log(vs[idx])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(t_min, t_max, float(slope), float(intercept), r2, int(idx.size))


def _mean_std(stack):
    # sorting makes the reduction independent of realization order
    stack = np.sort(stack, axis=0)
    n = stack.shape[0]
    mean = stack.sum(axis=0) / n
    std = np.sqrt(((stack - mean) ** 2).sum(axis=0) / (n - 1)) if n > 1 else np.zeros_like(mean)
    return mean, std


def aggregate_realizations(trajectories) -> Aggregate:
    """Per-t mean and sample std of violation_sq (and any observed series)."""
    trajectories = list(trajectories)
    if not trajectories:
        raise InvalidInputError("nothing to aggregate")
    t = trajectories[0].t
    for tr in trajectories[1:]:
        if not np.array_equal(tr.t, t):
            raise InvalidInputError("trajectories have mismatched record grids")
    mean, std = _mean_std(np.stack([tr.violation_sq for tr in trajectories]))
    observed = {}
    for name in trajectories[0].observed:
        observed[name] = _mean_std(np.stack([tr.observed[name] for tr in trajectories]))
    return Aggregate(t.copy(), mean, std, len(trajectories), observed)


@dataclass
class NeGapSeries:
    t: np.ndarray
    gap: np.ndarray
    ne_violation_sq: np.ndarray


def ne_gap_series(
    game: GameSpec,
    constraint: ConstraintSpec,
    trajectory,
    solver_tol: float = 1e-9,
    **solver_kwargs,
) -> NeGapSeries:
    """||x_t - x*(alpha_t)|| and ||A x*(alpha_t) - target||^2 at the trajectory's snapshots."""
    times = sorted(trajectory.snapshots)
    gaps, viol = [], []
    for t in times:
        x, alpha = trajectory.snapshots[t]
        x_star = solve_ne(game, constraint, alpha, tol=solver_tol, x0=x, **solver_kwargs).x_star
        gaps.append(float(np.linalg.norm(x - x_star)))
        v = constraint.a_matrix @ x_star - constraint.target
        viol.append(float(v @ v))
    return NeGapSeries(np.array(times), np.array(gaps), np.array(viol))
