"""Euclidean projection onto box-plus-budget action sets.

Every action set used here has the form

    {x in R^d : 0 <= x_i <= upper_i, sum_i x_i <= cap}

with ``upper_i`` possibly infinite (plain budget simplex) and ``cap`` possibly
infinite (plain box). The projection is the KKT solution of that QP: clamp,
and if the budget is violated, find the multiplier ``lam > 0`` with
``sum_i clamp(p_i - lam, 0, upper_i) == cap`` by bisection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InvalidInputError, UnsupportedOperationError

SOLVE_TOL = 1e-12
FEAS_TOL = 1e-10
_MAX_BISECT = 200


@dataclass(frozen=True, eq=False)
class ActionSet:
    """One player's action set. Build with the classmethods, not directly."""

    kind: str
    upper: np.ndarray
    cap: float

    def __post_init__(self):
        upper = np.asarray(self.upper, dtype=float)
        if upper.ndim != 1 or upper.size == 0:
            raise InvalidInputError("upper must be a non-empty vector")
        if np.isnan(upper).any() or (upper < 0).any():
            raise InvalidInputError("upper bounds must be >= 0")
        if np.isnan(self.cap) or self.cap < 0:
            raise InvalidInputError("cap must be >= 0")
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cap", float(self.cap))

    @classmethod
    def box(cls, upper) -> "ActionSet":
        return cls("box", np.asarray(upper, dtype=float), np.inf)

    @classmethod
    def capped_box(cls, upper, cap: float) -> "ActionSet":
        return cls("capped_box", np.asarray(upper, dtype=float), cap)

    @classmethod
    def capped_simplex(cls, cap: float, dim: int) -> "ActionSet":
        return cls("capped_simplex", np.full(dim, np.inf), cap)

    @property
    def dim(self) -> int:
        return self.upper.size

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            x.shape == (self.dim,)
            and (x >= -tol).all()
            and (x <= self.upper + tol).all()
            and x.sum() <= self.cap + tol
        )

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw points of the set: uniform on the bounding box, then projected."""
        hi = np.minimum(self.upper, self.cap if np.isfinite(self.cap) else np.inf)
        hi = np.where(np.isfinite(hi), hi, 1.0)
        shape = (self.dim,) if size is None else (size, self.dim)
        p = rng.uniform(0.0, 1.0, shape) * hi
        if size is None:
            return project(self, p)
        return project_blocks(p, np.broadcast_to(self.upper, p.shape), np.full(size, self.cap))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "upper": [None if not np.isfinite(u) else float(u) for u in self.upper],
            "cap": None if not np.isfinite(self.cap) else self.cap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ActionSet":
        upper = np.array([np.inf if u is None else u for u in data["upper"]], dtype=float)
        cap = np.inf if data["cap"] is None else float(data["cap"])
        return cls(data["kind"], upper, cap)


@numba.njit(cache=True, nogil=True)
def _project_rows(p, upper, cap, out):
    n, d = p.shape
    for k in range(n):
        total = 0.0
        pmax = -np.inf
        for i in range(d):
            v = p[k, i]
            q = min(max(v, 0.0), upper[k, i])
            out[k, i] = q
            total += q
            if v > pmax:
                pmax = v
        c = cap[k]
        if total <= c:
            continue
        if c <= 0.0:
            for i in range(d):
                out[k, i] = 0.0
            continue
        # sum_i clamp(p_i - lam, 0, u_i) is non-increasing in lam; at lam = pmax it is 0
        lo = 0.0
        hi = pmax
        for _ in range(_MAX_BISECT):
            if hi - lo <= SOLVE_TOL:
                break
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            total = 0.0
            for i in range(d):
                total += min(max(p[k, i] - mid, 0.0), upper[k, i])
            if total > c:
                lo = mid
            else:
                hi = mid
        # hi keeps the budget satisfied
        for i in range(d):
            out[k, i] = min(max(p[k, i] - hi, 0.0), upper[k, i])


def project_blocks(p, upper, cap) -> np.ndarray:
    """Project each row of ``p`` (shape (N, d)) onto its own box-plus-budget set."""
    p = np.ascontiguousarray(p, dtype=float)
    if not np.isfinite(p).all():
        raise InvalidInputError("cannot project a non-finite point")
    out = np.empty_like(p)
    _project_rows(
        p,
        np.ascontiguousarray(upper, dtype=float),
        np.ascontiguousarray(cap, dtype=float),
        out,
    )
    return out


def project(action_set: ActionSet, p) -> np.ndarray:
    """Euclidean projection of ``p`` onto ``action_set``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (action_set.dim,):
        raise InvalidInputError(f"point has shape {p.shape}, set has dim {action_set.dim}")
    return project_blocks(
        p[None, :], action_set.upper[None, :], np.array([action_set.cap])
    )[0]


def project_oracle(action_set: ActionSet, p) -> np.ndarray:
    """Brute-force projection by enumerating active sets (test oracle, d <= 4).

    Each coordinate is at its lower bound, at its upper bound or free, and the
    budget is either slack or tight. For each pattern the stationary point on
    the corresponding face is formed; the closest feasible candidate wins.
    """
    p = np.asarray(p, dtype=float)
    d = action_set.dim
    if d > 4:
        raise UnsupportedOperationError("oracle only supports d <= 4")
    if p.shape != (d,):
        raise InvalidInputError("dimension mismatch")
    u, cap = action_set.upper, action_set.cap
    best, best_dist = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=d):
        pattern = np.array(pattern)
        if np.any((pattern == 2) & ~np.isfinite(u)):
            continue
        fixed = np.where(pattern == 2, u, 0.0)
        free = pattern == 1
        candidates = []
        x = np.where(free, p, fixed)
        candidates.append(x)
        if np.isfinite(cap) and free.any():
            lam = (p[free].sum() + fixed[~free].sum() - cap) / free.sum()
            candidates.append(np.where(free, p - lam, fixed))
        for x in candidates:
            if not action_set.contains(x, tol=1e-12):
                continue
            dist = float(np.sum((x - p) ** 2))
            if dist < best_dist:
                best, best_dist = x, dist
    if best is None:
        # the origin is always feasible, so this cannot be reached for valid sets
        raise InvalidInputError("no feasible candidate found")
    return best


def stack_sets(sets) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-player sets into ``(upper (N, d), cap (N,))`` arrays."""
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise InvalidInputError("all action sets must share one dimension")
    upper = np.stack([s.upper for s in sets])
    cap = np.array([s.cap for s in sets])
    return upper, cap


def project_joint(sets, p) -> np.ndarray:
    """Blockwise projection of a joint action onto the product of ``sets``."""
    upper, cap = stack_sets(sets)
    p = np.asarray(p, dtype=float)
    if p.shape != (upper.size,):
        raise InvalidInputError(f"joint point has shape {p.shape}, expected ({upper.size},)")
    return project_blocks(p.reshape(upper.shape), upper, cap).ravel()
