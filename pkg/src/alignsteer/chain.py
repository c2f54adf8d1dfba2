"""Graph structure of the single-armed MDP and reachability certificates."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import ArmModel
from .static import StationaryPoint

POSITIVE_TOL = 1e-12


@dataclass(frozen=True)
class ChainStructure:
    classes: list[list[int]]
    closed_classes: list[list[int]]
    transient_states: list[int]
    weakly_communicating: bool
    periods_under_Palpha: list[int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "classes": self.classes,
            "closed_classes": self.closed_classes,
            "transient_states": self.transient_states,
            "weakly_communicating": self.weakly_communicating,
            "periods_under_Palpha": self.periods_under_Palpha,
        }


@dataclass(frozen=True)
class ReachabilityCertificate:
    T0: int
    p0: float
    theta: float

    def to_dict(self) -> dict[str, Any]:
        return {"T0": self.T0, "p0": self.p0, "theta": self.theta}


def _strong_components(adj: np.ndarray) -> list[list[int]]:
    _, labels = connected_components(csr_matrix(adj.astype(np.int8)), directed=True, connection="strong")
    groups: dict[int, list[int]] = {}
    for s, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(s)
    return sorted(groups.values(), key=lambda c: c[0])


def _periods(adj: np.ndarray, classes: list[list[int]]) -> list[int]:
    """Period of every state: gcd of level differences along in-class edges of a BFS tree.

    A state with no cycle through it gets period 1.
    """
    S = adj.shape[0]
    periods = [1] * S
    for cls in classes:
        members = set(cls)
        root = cls[0]
        level = {root: 0}
        queue = deque([root])
        g = 0
        while queue:
            s = queue.popleft()
            for t in np.flatnonzero(adj[s]):
                t = int(t)
                if t not in members:
                    continue
                if t not in level:
                    level[t] = level[s] + 1
                    queue.append(t)
                else:
                    g = math.gcd(g, level[s] + 1 - level[t])
        for s in cls:
            periods[s] = g if g > 0 else 1
    return periods


def _can_avoid(model: ArmModel, region: set[int]) -> set[int]:
    """States of ``region`` from which some policy keeps the arm in ``region`` forever."""
    keep = set(region)
    changed = True
    while changed:
        changed = False
        for s in sorted(keep):
            stays = any(
                all(t in keep for t in np.flatnonzero(P[s] > 0.0)) for P in (model.P0, model.P1)
            )
            if not stays:
                keep.discard(s)
                changed = True
    return keep


def analyze_chain(model: ArmModel) -> ChainStructure:
    """Communicating classes of the union graph, weak communication and periods under P_alpha."""
    adj = (model.P0 > 0.0) | (model.P1 > 0.0)
    classes = _strong_components(adj)
    label = {s: i for i, cls in enumerate(classes) for s in cls}
    closed = []
    for cls in classes:
        targets = {label[int(t)] for s in cls for t in np.flatnonzero(adj[s])}
        if targets <= {label[cls[0]]}:
            closed.append(cls)
    in_closed = {s for cls in closed for s in cls}
    transient = [s for s in range(model.num_states) if s not in in_closed]

    weakly = False
    if len(closed) == 1:
        weakly = not _can_avoid(model, set(transient))

    # P_alpha has the same support as the union graph since 0 < alpha < 1
    periods = _periods(model.P_alpha > 0.0, classes)
    return ChainStructure(classes, closed, transient, weakly, periods)


def find_certificate(model: ArmModel, sp: StationaryPoint, cap: int | None = None) -> ReachabilityCertificate | None:
    """Smallest T0 <= cap with every entry of P_alpha^T0 into the support of x* positive.

    Returns None when no such T0 exists up to ``cap`` (default 4 S^2); that is
    inconclusive, not a proof of unreachability.
    """
    S = model.num_states
    cap = 4 * S * S if cap is None else cap
    if cap < 1:
        raise ValueError("cap must be >= 1")
    support = sp.support
    if support.size == 0:
        return None
    Pa = model.P_alpha
    power = np.eye(S)
    for T0 in range(1, cap + 1):
        power = power @ Pa
        p0 = float(power[:, support].min())
        if p0 > POSITIVE_TOL:
            return ReachabilityCertificate(T0=T0, p0=p0, theta=p0 / float(np.max(sp.x_star)))
    return None
