"""Deterministic control rules on the simplex: align-and-steer and its pieces."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .lp import LinearProgram, WarmStart, solve_lp
from .model import ArmModel, phi
from .static import SUPPORT_TOL, StationaryPoint

ALIGNED_TOL = 1e-9
DEFAULT_WINDOW = 100

ControlRule = Callable[[np.ndarray], np.ndarray]


class ControlRuleError(RuntimeError):
    """A control rule failed while generating a trajectory."""


def max_alignment_coef(x, x_star) -> float:
    """Largest delta >= 0 with x >= delta * x_star, i.e. min of x_s / x*_s over the support."""
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    support = x_star > SUPPORT_TOL
    if not support.any():
        raise ValueError("x_star has no positive coordinate")
    delta = float(np.min(x[support] / x_star[support]))
    return min(max(delta, 0.0), 1.0)


def _fit_to_budget(u: np.ndarray, x: np.ndarray, alpha: float) -> np.ndarray:
    """Project LP round-off back into U(x): clip to [0, x], then spread the budget residual."""
    u = np.clip(u, 0.0, x)
    gap = alpha - u.sum()
    if gap > 0:
        room = x - u
        u = u + room * (gap / room.sum())
    elif gap < 0:
        u = u + u * (gap / u.sum())
    return u


def linear_steer(x, alpha: float) -> np.ndarray:
    """Activate the same fraction alpha of every state."""
    return alpha * np.asarray(x, dtype=float)


class WindowPlan(NamedTuple):
    value: float
    states: np.ndarray
    controls: np.ndarray


@lru_cache(maxsize=32)
def _window_structure(model: ArmModel, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    S, T = model.num_states, horizon
    I = np.eye(S)
    A = np.zeros(((S + 1) * T, 2 * S * T))
    for t in range(T):
        rows = slice(S * t, S * (t + 1))
        A[rows, 2 * S * t : 2 * S * (t + 1)] = np.hstack([I, I])
        if t > 0:
            A[rows, 2 * S * (t - 1) : 2 * S * t] = -np.hstack([model.P0.T, model.P1.T])
        A[S * T + t, 2 * S * t + S : 2 * S * (t + 1)] = 1.0
    c = np.tile(np.concatenate([model.r0, model.r1]), T)
    A.setflags(write=False)
    c.setflags(write=False)
    return A, c


def _window_lp(model: ArmModel, x, horizon: int) -> LinearProgram:
    A, c = _window_structure(model, horizon)
    S, T = model.num_states, horizon
    b = np.zeros((S + 1) * T)
    b[:S] = np.asarray(x, dtype=float)
    b[S * T :] = model.alpha
    n = c.size
    return LinearProgram(c=c, A=A, b=b, lo=np.zeros(n), hi=np.full(n, np.inf))


@lru_cache(maxsize=32)
def _reference_basis(model: ArmModel, horizon: int):
    # optimal basis at the uniform state; a fixed hint keeps mpc_steer a pure function of x
    S = model.num_states
    sol = solve_lp(_window_lp(model, np.full(S, 1.0 / S), horizon))
    return sol.warm if sol.optimal else None


def cec_window(model: ArmModel, x, horizon: int, warm: bool | WarmStart = False) -> WindowPlan:
    """Optimal open-loop plan of the deterministic problem over ``horizon`` steps.

    Maximises sum_{t<horizon} R(x(t), u(t)) subject to x(0) = x and
    x(t+1) = phi(x(t), u(t)), u(t) in U(x(t)). The LP works in passive and
    active frequencies (y_t, u_t) >= 0 with x(t) = y_t + u_t.

    ``warm=True`` starts the solver from the optimal basis at the uniform
    state; a :class:`WarmStart` from an earlier window solve is used as is.
    """
    plan, _ = _solve_window(model, x, horizon, warm)
    return plan


def _solve_window(model: ArmModel, x, horizon: int, warm) -> tuple[WindowPlan, WarmStart | None]:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    S, T = model.num_states, horizon
    if warm is True:
        warm = _reference_basis(model, horizon)
    sol = solve_lp(_window_lp(model, x, horizon), warm=warm or None)
    if not sol.optimal:
        raise ControlRuleError(f"finite-horizon LP is {sol.status}")
    z = np.maximum(sol.z.reshape(T, 2, S), 0.0)
    return WindowPlan(sol.objective_value, z[:, 0] + z[:, 1], z[:, 1]), sol.warm


def mpc_steer(model: ArmModel, x, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """First control of the optimal ``window``-step plan from ``x``."""
    x = np.asarray(x, dtype=float)
    plan = cec_window(model, x, window, warm=True)
    return _fit_to_budget(plan.controls[0], x, model.alpha)


@dataclass(frozen=True)
class SteeringRule:
    """Steering control applied to the unaligned part of the population.

    With ``kind="mpc"`` and ``chain=True`` each window LP is warm-started from
    the basis of the previous call on the same instance; consecutive states
    along a trajectory are close, so this saves most of the pivots. The hint
    never changes the optimal value, but when the window LP has several
    optimal first controls the one returned may depend on call history.
    ``chain=False`` makes the rule a pure function of ``x``.
    """

    model: ArmModel
    kind: str = "linear"
    window: int = DEFAULT_WINDOW
    chain: bool = True
    _hint: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "mpc"):
            raise ValueError(f"unknown steering kind {self.kind!r}")
        if self.kind == "mpc" and self.window < 1:
            raise ValueError("MPC window must be >= 1")

    def __call__(self, x) -> np.ndarray:
        if self.kind == "linear":
            return linear_steer(x, self.model.alpha)
        if not self.chain:
            return mpc_steer(self.model, x, self.window)
        x = np.asarray(x, dtype=float)
        plan, warm = _solve_window(self.model, x, self.window, self._hint.get("warm", True))
        self._hint["warm"] = warm
        return _fit_to_budget(plan.controls[0], x, self.model.alpha)

    def reset(self) -> None:
        """Forget the warm-start chain."""
        self._hint.clear()

    @property
    def label(self) -> str:
        return "align-linear" if self.kind == "linear" else f"align-mpc(Tw={self.window})"


def align_and_steer_control(x, sp: StationaryPoint, steer: SteeringRule) -> np.ndarray:
    """Send delta(x) of the mass along u* and steer the normalised residual."""
    x = np.asarray(x, dtype=float)
    delta = max_alignment_coef(x, sp.x_star)
    if delta == 1.0:
        return np.array(sp.u_star, dtype=float)
    if 1.0 - delta < ALIGNED_TOL:
        # residual too small to normalise; steer it linearly in unnormalised form
        return delta * sp.u_star + steer.model.alpha * np.maximum(x - delta * sp.x_star, 0.0)
    resid = np.maximum(x - delta * sp.x_star, 0.0)
    resid /= resid.sum()
    return delta * sp.u_star + (1.0 - delta) * steer(resid)


@dataclass(frozen=True)
class AlignAndSteer:
    """Stationary align-and-steer rule as a callable x -> u."""

    sp: StationaryPoint
    steer: SteeringRule

    def __call__(self, x) -> np.ndarray:
        return align_and_steer_control(x, self.sp, self.steer)

    @property
    def label(self) -> str:
        return self.steer.label


class Trajectory(NamedTuple):
    states: np.ndarray  # (T + 1, S), includes x(T)
    controls: np.ndarray  # (T, S)


def deterministic_trajectory(model: ArmModel, rule: ControlRule, x0, horizon: int) -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    S = model.num_states
    states = np.empty((horizon + 1, S))
    controls = np.empty((horizon, S))
    x = np.asarray(x0, dtype=float)
    states[0] = x
    for t in range(horizon):
        try:
            u = np.asarray(rule(x), dtype=float)
            x = phi(model, x, u)
        except Exception as exc:
            raise ControlRuleError(f"control rule failed at t={t}: {exc}") from exc
        controls[t] = u
        states[t + 1] = x
    return Trajectory(states, controls)


def delayed_align_trajectory(model: ArmModel, sp: StationaryPoint, x0, horizon: int, certificate=None):
    """Trajectory of the alignment-delaying rule used in the effectiveness argument.

    The aligned mass is frozen at its value from the start of each block of
    ``certificate.T0`` steps and only re-evaluated at block boundaries; the
    rest is steered linearly. Not a stationary rule, so it is only meant as
    a comparison trajectory.

    Returns ``(states, deltas)`` for t = 0..horizon-1, deltas[t] being the
    alignment coefficient of states[t].
    """
    if certificate is None:
        raise ValueError("delayed alignment needs a reachability certificate (block length T0)")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    T0 = certificate.T0
    states = np.empty((horizon, model.num_states))
    deltas = np.empty(horizon)
    x = np.asarray(x0, dtype=float)
    frozen = 0.0
    for t in range(horizon):
        d = max_alignment_coef(x, sp.x_star)
        if t % T0 == 0:
            frozen = 1.0 if 1.0 - d < ALIGNED_TOL else d
        states[t], deltas[t] = x, d
        # (1 - frozen) * alpha * residual / (1 - frozen) without the division
        u = frozen * sp.u_star + model.alpha * np.maximum(x - frozen * sp.x_star, 0.0)
        x = (x - u) @ model.P0 + u @ model.P1
    return states, deltas


@dataclass(frozen=True)
class BiasVector:
    g: np.ndarray  # length 2S: accumulated state deviation then control deviation
    horizon: int


def bias_truncated(model: ArmModel, rule: ControlRule, x0, sp: StationaryPoint, horizon: int) -> BiasVector:
    """Accumulated deviation sum_{t<T} (x(t), u(t)) - (x*, u*) along the rule's trajectory."""
    traj = deterministic_trajectory(model, rule, x0, horizon)
    dx = (traj.states[:horizon] - sp.x_star).sum(axis=0)
    du = (traj.controls - sp.u_star).sum(axis=0)
    return BiasVector(np.concatenate([dx, du]), horizon)

