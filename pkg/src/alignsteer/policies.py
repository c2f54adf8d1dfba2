"""N-armed policies induced from deterministic control rules by grid rounding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ControlRule
from .model import InfeasibleControlError, ModelError, check_feasible, to_counts

SNAP_TOL = 1e-9


def budget_units(alpha: float, N: int) -> int:
    """alpha * N as an exact integer, or ModelError."""
    k = alpha * N
    if abs(k - round(k)) > 1e-9:
        raise ModelError(f"alpha*N not integer (alpha={alpha}, N={N})")
    return int(round(k))


def _split(x, u_bar, N: int, alpha: float):
    """Grid counts of x, floors of N*u_bar, fractional parts and the unit deficit."""
    x = np.asarray(x, dtype=float)
    u_bar = np.asarray(u_bar, dtype=float)
    budget = budget_units(alpha, N)
    x_counts = to_counts(x, N)
    if not check_feasible(x, u_bar, alpha):
        raise InfeasibleControlError("u_bar is not a feasible control for x")
    scaled = u_bar * N
    near = np.rint(scaled)
    scaled = np.where(np.abs(scaled - near) <= SNAP_TOL, near, scaled)
    floors = np.minimum(np.floor(scaled), x_counts).astype(np.int64)
    floors = np.maximum(floors, 0)
    frac = scaled - floors
    deficit = budget - int(floors.sum())
    return x_counts, floors, frac, deficit


def round_control(x, u_bar, N: int, alpha: float) -> np.ndarray:
    """Deterministic rounding of ``u_bar`` onto U^N(x).

    Starts from floor(N u_bar) and hands the missing budget units to the
    states with the largest fractional parts (lowest index on ties),
    skipping states with no headroom.
    """
    x_counts, floors, frac, deficit = _split(x, u_bar, N, alpha)
    counts = floors.copy()
    order = sorted(range(len(frac)), key=lambda s: (-frac[s], s))
    for s in order:
        if deficit <= 0:
            break
        if counts[s] < x_counts[s]:
            counts[s] += 1
            deficit -= 1
    if deficit != 0:
        raise InfeasibleControlError("could not place the full budget on the grid")
    return counts / N


def randomized_round(x, u_bar, N: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Unbiased rounding onto U^N(x) by systematic sampling of the fractional parts.

    One uniform offset u in [0, 1) selects the states whose cumulative
    fractional interval contains a point u + k; each state is picked with
    probability equal to its fractional part and exactly ``deficit`` states
    are picked, so the budget holds surely and E[U] = u_bar.
    """
    x_counts, floors, frac, deficit = _split(x, u_bar, N, alpha)
    counts = floors.copy()
    if deficit > 0:
        edges = np.concatenate([[0.0], np.cumsum(frac)])
        edges[-1] = float(deficit)
        points = rng.random() + np.arange(deficit)
        picks = np.searchsorted(edges, points, side="right") - 1
        counts[picks] += 1
    if np.any(counts > x_counts) or counts.sum() != budget_units(alpha, N):
        raise InfeasibleControlError("randomized rounding left U^N(x)")
    return counts / N


@dataclass(frozen=True)
class InducedPolicy:
    """Stationary N-armed policy: apply ``rule`` then round onto the 1/N grid."""

    rule: ControlRule
    N: int
    alpha: float
    rounding: str = "deterministic"

    def __post_init__(self):
        budget_units(self.alpha, self.N)
        if self.rounding not in ("deterministic", "randomized"):
            raise ValueError(f"unknown rounding {self.rounding!r}")

    @property
    def label(self) -> str:
        return getattr(self.rule, "label", "custom")


def policy_step(policy: InducedPolicy, X, rng: np.random.Generator | None = None) -> np.ndarray:
    u_bar = policy.rule(np.asarray(X, dtype=float))
    if policy.rounding == "randomized":
        if rng is None:
            raise ValueError("randomized rounding needs an rng")
        return randomized_round(X, u_bar, policy.N, policy.alpha, rng)
    return round_control(X, u_bar, policy.N, policy.alpha)
