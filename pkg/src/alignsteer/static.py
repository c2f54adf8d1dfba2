"""Refined and conventional static problems and their optimal stationary points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .lp import LinearProgram, solve_lp
from .model import BUDGET_TOL, NONNEG_TOL, ArmModel, population

STATIONARY_TOL = 1e-7
SUPPORT_TOL = 1e-9


class StaticSolveError(RuntimeError):
    """The static LP was infeasible or unbounded for a valid model."""


@dataclass(frozen=True, eq=False)
class StationaryPoint:
    x_star: np.ndarray
    u_star: np.ndarray
    h0: np.ndarray
    h1: np.ndarray
    value: float
    x_init: np.ndarray | None = None

    @property
    def support(self) -> np.ndarray:
        """Indices of states carrying positive stationary mass."""
        return np.flatnonzero(self.x_star > SUPPORT_TOL)

    def to_dict(self) -> dict[str, Any]:
        return {
            "x_star": self.x_star.tolist(),
            "u_star": self.u_star.tolist(),
            "h0": self.h0.tolist(),
            "h1": self.h1.tolist(),
            "value": self.value,
            "x_init": None if self.x_init is None else self.x_init.tolist(),
        }


def _stationarity_block(model: ArmModel) -> np.ndarray:
    # rows s': (y+u)_{s'} - sum_s y_s P0[s,s'] - sum_s u_s P1[s,s'] = 0
    I = np.eye(model.num_states)
    return np.hstack([I - model.P0.T, I - model.P1.T])


def _clean(v: np.ndarray) -> np.ndarray:
    v = np.where(np.abs(v) < 1e-13, 0.0, v)
    return np.maximum(v, 0.0)


def _solve(lp: LinearProgram, S: int, with_h: bool, x_init) -> StationaryPoint:
    sol = solve_lp(lp)
    if not sol.optimal:
        raise StaticSolveError(f"static LP is {sol.status}; model or x_init inconsistent")
    z = sol.z
    y, u = _clean(z[:S]), _clean(z[S : 2 * S])
    if with_h:
        h0, h1 = _clean(z[2 * S : 3 * S]), _clean(z[3 * S : 4 * S])
    else:
        h0 = h1 = np.zeros(S)
    x = y + u
    return StationaryPoint(x_star=x, u_star=u, h0=h0, h1=h1, value=sol.objective_value, x_init=x_init)


def solve_refined_static(model: ArmModel, x_init) -> StationaryPoint:
    """Optimal stationary point tied to ``x_init`` through deviation variables.

    LP variables are ``(y, u, h0, h1) >= 0`` with ``y = x - u`` the passive
    frequencies; constraints are stationarity, the budget and
    ``x + h0 + h1 - h0 P0 - h1 P1 = x_init``.
    """
    S = model.num_states
    x_init = population(x_init, num_states=S)
    I = np.eye(S)
    Z = np.zeros((S, S))
    A = np.vstack([
        np.hstack([_stationarity_block(model), Z, Z]),
        np.concatenate([np.zeros(S), np.ones(S), np.zeros(2 * S)])[None, :],
        np.hstack([I, I, I - model.P0.T, I - model.P1.T]),
    ])
    b = np.concatenate([np.zeros(S), [model.alpha], x_init])
    c = np.concatenate([model.r0, model.r1, np.zeros(2 * S)])
    lp = LinearProgram(c=c, A=A, b=b, lo=np.zeros(4 * S), hi=np.full(4 * S, np.inf))
    return _solve(lp, S, True, x_init)


def solve_conventional_static(model: ArmModel) -> StationaryPoint:
    """Optimal stationary point of the problem normalised only by x.1 = 1."""
    S = model.num_states
    A = np.vstack([
        _stationarity_block(model),
        np.concatenate([np.zeros(S), np.ones(S)])[None, :],
        np.ones((1, 2 * S)),
    ])
    b = np.concatenate([np.zeros(S), [model.alpha, 1.0]])
    c = np.concatenate([model.r0, model.r1])
    lp = LinearProgram(c=c, A=A, b=b, lo=np.zeros(2 * S), hi=np.full(2 * S, np.inf))
    return _solve(lp, S, False, None)


def complete_stationary_point(model: ArmModel, x_star, u_star, x_init) -> StationaryPoint:
    """Attach deviation vectors h0, h1 to a given (x*, u*) for ``x_init``.

    Solves the feasibility LP in (h0, h1) alone; raises
    :class:`StaticSolveError` when no nonnegative deviation exists.
    """
    S = model.num_states
    x_star = np.asarray(x_star, dtype=float)
    u_star = np.asarray(u_star, dtype=float)
    x_init = population(x_init, num_states=S)
    I = np.eye(S)
    lp = LinearProgram(
        c=np.zeros(2 * S),
        A=np.hstack([I - model.P0.T, I - model.P1.T]),
        b=x_init - x_star,
        lo=np.zeros(2 * S),
        hi=np.full(2 * S, np.inf),
    )
    sol = solve_lp(lp)
    if not sol.optimal:
        raise StaticSolveError("no nonnegative deviation vectors reach x_init from x_star")
    h0, h1 = _clean(sol.z[:S]), _clean(sol.z[S:])
    value = float((x_star - u_star) @ model.r0 + u_star @ model.r1)
    return StationaryPoint(x_star=x_star, u_star=u_star, h0=h0, h1=h1, value=value, x_init=x_init)


def stationary_point_violations(model: ArmModel, sp: StationaryPoint) -> list[str]:
    """Names of the stationary-point invariants that ``sp`` breaks (empty if none)."""
    x, u = np.asarray(sp.x_star), np.asarray(sp.u_star)
    bad = []
    if np.any(x < -NONNEG_TOL) or abs(x.sum() - 1.0) > STATIONARY_TOL:
        bad.append("simplex")
    if abs(u.sum() - model.alpha) > BUDGET_TOL:
        bad.append("budget")
    if np.any(u < -NONNEG_TOL) or np.any(u > x + NONNEG_TOL):
        bad.append("control bounds")
    nxt = (x - u) @ model.P0 + u @ model.P1
    if np.abs(nxt - x).sum() > STATIONARY_TOL:
        bad.append("stationarity")
    if np.any(sp.h0 < -NONNEG_TOL) or np.any(sp.h1 < -NONNEG_TOL):
        bad.append("deviation sign")
    if sp.x_init is not None:
        lhs = x + sp.h0 + sp.h1 - sp.h0 @ model.P0 - sp.h1 @ model.P1
        if np.abs(lhs - sp.x_init).sum() > STATIONARY_TOL:
            bad.append("deviation balance")
    value = float((x - u) @ model.r0 + u @ model.r1)
    if abs(value - sp.value) > 1e-9:
        bad.append("value")
    return bad


def verify_stationary_point(model: ArmModel, sp: StationaryPoint) -> bool:
    return not stationary_point_violations(model, sp)
