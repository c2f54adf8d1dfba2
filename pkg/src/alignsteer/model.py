"""Single-armed model, population vectors and the deterministic mean-field map."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
SIMPLEX_SUM_TOL = 1e-9
NONNEG_TOL = 1e-12
BUDGET_TOL = 1e-9
GRID_TOL = 1e-6

MODEL_KEYS = ("num_states", "alpha", "P0", "P1", "r0", "r1")
OPTIONAL_KEYS = ("x_init",)
BUILTIN_MODELS = {"four-state": "four_state.json", "identity": "identity.json"}


class ModelError(ValueError):
    """Raised for malformed model descriptions or vectors."""


class InfeasibleControlError(ValueError):
    """Raised when a control is not in U(x)."""


@dataclass(frozen=True, eq=False)
class ArmModel:
    """Homogeneous two-action arm: transition matrices, rewards and budget fraction."""

    P0: np.ndarray
    P1: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    alpha: float

    @property
    def num_states(self) -> int:
        return self.P0.shape[0]

    @property
    def P_alpha(self) -> np.ndarray:
        # transition matrix of "activate with probability alpha"; x.P_alpha = phi(x, alpha*x)
        return self.alpha * self.P1 + (1.0 - self.alpha) * self.P0

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_states": self.num_states,
            "alpha": self.alpha,
            "P0": self.P0.tolist(),
            "P1": self.P1.tolist(),
            "r0": self.r0.tolist(),
            "r1": self.r1.tolist(),
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_stochastic(name: str, P: np.ndarray) -> None:
    if np.any(P < 0.0) or np.any(P > 1.0):
        i, j = np.argwhere((P < 0.0) | (P > 1.0))[0]
        raise ModelError(f"{name}: entry ({i}, {j}) = {P[i, j]:g} outside [0, 1]")
    sums = P.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise ModelError(f"{name}: non-stochastic row {i}, sum {s:.12g}")


def validate_model(raw: Mapping[str, Any]) -> ArmModel:
    """Build an :class:`ArmModel` from a plain mapping, checking every invariant.

    Unknown keys are logged and ignored; ``x_init`` is tolerated but not
    consumed here (see :func:`load_model`).
    """
    missing = [k for k in MODEL_KEYS if k not in raw]
    if missing:
        raise ModelError(f"missing model keys: {', '.join(missing)}")
    unknown = sorted(set(raw) - set(MODEL_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        log.warning("ignoring unknown model keys: %s", ", ".join(unknown))

    S = raw["num_states"]
    if isinstance(S, bool) or not isinstance(S, (int, np.integer)) or S < 1:
        raise ModelError(f"num_states must be a positive integer, got {S!r}")
    try:
        P0 = np.asarray(raw["P0"], dtype=float)
        P1 = np.asarray(raw["P1"], dtype=float)
        r0 = np.asarray(raw["r0"], dtype=float)
        r1 = np.asarray(raw["r1"], dtype=float)
        alpha = float(raw["alpha"])
    except (TypeError, ValueError) as exc:
        raise ModelError(f"non-numeric model entry: {exc}") from exc

    for name, P in (("P0", P0), ("P1", P1)):
        if P.shape != (S, S):
            raise ModelError(f"dimension mismatch: {name} has shape {P.shape}, expected ({S}, {S})")
    for name, r in (("r0", r0), ("r1", r1)):
        if r.shape != (S,):
            raise ModelError(f"dimension mismatch: {name} has shape {r.shape}, expected ({S},)")
        if not np.all(np.isfinite(r)):
            raise ModelError(f"{name} has non-finite entries")
    _check_stochastic("P0", P0)
    _check_stochastic("P1", P1)
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise ModelError(f"alpha must lie in (0, 1), got {alpha}")

    return ArmModel(P0=_frozen(P0), P1=_frozen(P1), r0=_frozen(r0), r1=_frozen(r1), alpha=alpha)


def load_model(source: str | Path) -> tuple[ArmModel, np.ndarray | None]:
    """Read a model JSON file (or ``builtin:<name>``) and return ``(model, x_init)``."""
    text = str(source)
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN_MODELS:
            raise ModelError(f"unknown builtin model {name!r}; choose from {sorted(BUILTIN_MODELS)}")
        raw = json.loads(resources.files("alignsteer.data").joinpath(BUILTIN_MODELS[name]).read_text())
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ModelError(f"cannot read model file {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON in {source}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ModelError("model file must contain a JSON object")
    model = validate_model(raw)
    x_init = None
    if raw.get("x_init") is not None:
        x_init = population(raw["x_init"], num_states=model.num_states)
    return model, x_init


def builtin_model(name: str) -> tuple[ArmModel, np.ndarray | None]:
    return load_model(f"builtin:{name}")


def population(x, num_states: int | None = None, N: int | None = None) -> np.ndarray:
    """Validate a point of the simplex, clamping entries within tolerance.

    With ``N`` given the point must also lie on the 1/N grid; it is snapped
    to exact multiples of 1/N.
    """
    x = np.array(x, dtype=float).reshape(-1)
    if num_states is not None and x.shape != (num_states,):
        raise ModelError(f"dimension mismatch: population vector of length {x.size}, expected {num_states}")
    if not np.all(np.isfinite(x)):
        raise ModelError("population vector has non-finite entries")
    if np.any(x < -NONNEG_TOL):
        raise ModelError(f"population vector has negative entry {x.min():g}")
    x[x < 0.0] = 0.0
    if abs(x.sum() - 1.0) > SIMPLEX_SUM_TOL:
        raise ModelError(f"population vector sums to {x.sum():.12g}, not 1")
    if N is not None:
        counts = to_counts(x, N)
        x = counts / N
    return x


def to_counts(v, N: int) -> np.ndarray:
    """Integer counts N*v, requiring v to sit on the 1/N grid."""
    scaled = np.asarray(v, dtype=float) * N
    counts = np.rint(scaled)
    if np.any(np.abs(scaled - counts) > GRID_TOL):
        raise ModelError(f"vector is not on the 1/{N} grid")
    return counts.astype(np.int64)


def grid_point(x, N: int) -> np.ndarray:
    """Nearest point of the 1/N grid to ``x`` (largest-remainder rounding)."""
    scaled = np.asarray(x, dtype=float) * N
    counts = np.floor(scaled + 1e-9).astype(np.int64)
    deficit = N - int(counts.sum())
    if deficit > 0:
        frac = scaled - counts
        order = sorted(range(len(frac)), key=lambda s: (-frac[s], s))
        for s in order[:deficit]:
            counts[s] += 1
    return counts / N


def check_feasible(x, u, alpha: float) -> bool:
    """True iff ``u`` is in U(x): budget sum alpha and 0 <= u <= x."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if abs(u.sum() - alpha) > BUDGET_TOL:
        return False
    return bool(np.all(u >= -NONNEG_TOL) and np.all(u <= x + NONNEG_TOL))


def _require_feasible(model: ArmModel, x, u) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (model.num_states,) or u.shape != x.shape:
        raise ModelError("dimension mismatch between model and (x, u)")
    if not check_feasible(x, u, model.alpha):
        raise InfeasibleControlError(
            f"control not feasible: sum(u)={u.sum():.12g}, alpha={model.alpha}, "
            f"max(u-x)={np.max(u - x):.3g}, min(u)={u.min():.3g}"
        )
    return x, u


def phi(model: ArmModel, x, u) -> np.ndarray:
    """Deterministic next population: (x - u) P0 + u P1."""
    x, u = _require_feasible(model, x, u)
    return (x - u) @ model.P0 + u @ model.P1


def reward(model: ArmModel, x, u) -> float:
    """Instant per-arm reward (x - u).r0 + u.r1."""
    x, u = _require_feasible(model, x, u)
    return float((x - u) @ model.r0 + u @ model.r1)
