"""Dense bounded-variable revised simplex.

Solves ``max c.z  s.t.  A z = b,  lo <= z <= hi`` with a two-phase method.
Phase one starts from an all-artificial basis; pricing is Dantzig's rule
until too many degenerate pivots accumulate, after which Bland's rule takes
over for the rest of the phase. The basis inverse is kept explicitly and
refactored periodically.

A solve may instead start from the final basis of an earlier solve of an LP
with the same ``c``, ``A`` and bounds. Such a basis stays dual feasible when
only ``b`` changes, so a dual simplex pass restores primal feasibility,
usually in far fewer pivots. Any trouble on that path falls back to a cold
solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PHASE1_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
PRIMAL_TOL = 1e-9
REFACTOR_EVERY = 100

_LOWER, _UPPER, _FREE, _BASIC = 0, 1, 2, 3


class LpNumericalError(RuntimeError):
    """The basis became singular or the iteration limit was hit."""

    def __init__(self, message: str, pivots: int):
        super().__init__(f"{message} (after {pivots} pivots)")
        self.pivots = pivots


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((len(self.b), 0))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        if A.shape != (b.size, n):
            raise ValueError(f"A has shape {A.shape}, expected ({b.size}, {n})")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or not np.all(np.isfinite(A)):
            raise ValueError("NaN in bounds or non-finite constraint matrix")
        for name, v in (("c", c), ("A", A), ("b", b), ("lo", lo), ("hi", hi)):
            object.__setattr__(self, name, v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


class WarmStart(NamedTuple):
    basis: np.ndarray
    state: np.ndarray
    art_sign: np.ndarray
    Binv: np.ndarray


def _eliminate(Binv: np.ndarray, col: np.ndarray, r: int) -> None:
    """Pivot the explicit inverse in place on row ``r`` of ``col = Binv @ a_j``."""
    prow = Binv[r] / col[r]
    # Binv is C-ordered, so its transpose is a Fortran view BLAS can update in place
    dger(-1.0, prow, col, a=Binv.T, overwrite_a=1)
    Binv[r] = prow


@dataclass
class LpSolution:
    status: str
    z: np.ndarray | None = None
    objective_value: float | None = None
    pivots: int = 0
    phase1_infeasibility: float = field(default=0.0, repr=False)
    warm: WarmStart | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Simplex:
    def __init__(self, lp: LinearProgram, warm: WarmStart | None = None):
        m, n = lp.shape
        self.m, self.n = m, n
        self.b = lp.b
        self.pivots = 0
        self._since_refactor = 0
        self.max_iter = 50 * (m + n) + 1000
        z = np.where(np.isfinite(lp.lo), lp.lo, np.where(np.isfinite(lp.hi), lp.hi, 0.0))
        if warm is not None:
            sign = warm.art_sign
            self.M = np.hstack([lp.A, np.diag(sign)])
            self.lo = np.concatenate([lp.lo, np.zeros(m)])
            self.hi = np.concatenate([lp.hi, np.zeros(m)])
            self.state = warm.state.copy()
            self.basis = warm.basis.copy()
            self.z = np.concatenate([z, np.zeros(m)])
            at_upper = self.state == _UPPER
            self.z[at_upper] = self.hi[at_upper]
            self.z[self.state == _FREE] = 0.0
            self.Binv = np.array(warm.Binv, order="C")
            nonbasic = self.state != _BASIC
            self.z[self.basis] = self.Binv @ (self.b - self.M[:, nonbasic] @ self.z[nonbasic])
            return
        state = np.where(np.isfinite(lp.lo), _LOWER, np.where(np.isfinite(lp.hi), _UPPER, _FREE))
        resid = lp.b - lp.A @ z
        sign = np.where(resid >= 0.0, 1.0, -1.0)

        self.M = np.hstack([lp.A, np.diag(sign)])
        self.lo = np.concatenate([lp.lo, np.zeros(m)])
        self.hi = np.concatenate([lp.hi, np.full(m, np.inf)])
        self.z = np.concatenate([z, np.abs(resid)])
        self.state = np.concatenate([state, np.full(m, _BASIC)])
        self.basis = np.arange(n, n + m)
        self.Binv = np.diag(sign)

    def refactor(self) -> None:
        B = self.M[:, self.basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise LpNumericalError("singular basis", self.pivots) from None
        if not np.all(np.isfinite(Binv)) or np.abs(Binv).max(initial=0.0) > 1e12:
            raise LpNumericalError("ill-conditioned basis", self.pivots)
        self.Binv = Binv
        nonbasic = self.state != _BASIC
        rhs = self.b - self.M[:, nonbasic] @ self.z[nonbasic]
        self.z[self.basis] = Binv @ rhs
        self._since_refactor = 0

    def run(self, cost: np.ndarray) -> str:
        """Iterate to optimality for ``cost``; returns OPTIMAL or UNBOUNDED."""
        m, n_all = self.M.shape
        degenerate = 0
        bland = False
        iters = 0
        movable = self.hi > self.lo
        while True:
            iters += 1
            if iters > self.max_iter:
                raise LpNumericalError("iteration limit reached", self.pivots)
            if self._since_refactor >= REFACTOR_EVERY:
                self.refactor()

            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            st = self.state
            up = ((st == _LOWER) | (st == _FREE)) & (d > DUAL_TOL)
            down = ((st == _UPPER) | (st == _FREE)) & (d < -DUAL_TOL)
            eligible = (up | down) & movable
            if not eligible.any():
                return OPTIMAL
            if bland:
                j = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                j = int(np.argmax(score))
            sigma = 1.0 if up[j] else -1.0

            col = self.Binv @ self.M[:, j]
            g = sigma * col
            xB = self.z[self.basis]
            loB = self.lo[self.basis]
            hiB = self.hi[self.basis]
            ratios = np.full(m, np.inf)
            dec = g > PIVOT_TOL
            inc = g < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios[dec] = (xB[dec] - loB[dec]) / g[dec]
                ratios[inc] = (hiB[inc] - xB[inc]) / (-g[inc])
            ratios = np.where(np.isnan(ratios), np.inf, np.maximum(ratios, 0.0))
            t_flip = self.hi[j] - self.lo[j]
            t_best = ratios.min() if m else np.inf

            if not np.isfinite(t_best) and not np.isfinite(t_flip):
                return UNBOUNDED

            if t_flip <= t_best:
                self.z[self.basis] = xB - t_flip * g
                self.z[j] = self.hi[j] if sigma > 0 else self.lo[j]
                self.state[j] = _UPPER if sigma > 0 else _LOWER
                continue

            ties = np.flatnonzero(ratios <= t_best + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(g[ties]))])
            t = ratios[r]
            if t <= PRIMAL_TOL:
                degenerate += 1
                if degenerate > 10 * (m + self.n):
                    bland = True

            leaving = self.basis[r]
            self.z[self.basis] = xB - t * g
            self.z[j] = self.z[j] + sigma * t
            if g[r] > 0:
                self.z[leaving], self.state[leaving] = self.lo[leaving], _LOWER
            else:
                self.z[leaving], self.state[leaving] = self.hi[leaving], _UPPER
            self.state[j] = _BASIC
            self.basis[r] = j

            _eliminate(self.Binv, col, r)
            self.pivots += 1
            self._since_refactor += 1

    def dual_feasible(self, cost: np.ndarray) -> bool:
        d = cost - (cost[self.basis] @ self.Binv) @ self.M
        movable = self.hi > self.lo
        st = self.state
        bad = movable & (
            ((st == _LOWER) & (d > DUAL_TOL))
            | ((st == _UPPER) & (d < -DUAL_TOL))
            | ((st == _FREE) & (np.abs(d) > DUAL_TOL))
        )
        return not bad.any()

    def run_dual(self, cost: np.ndarray) -> str:
        """Dual simplex from a dual-feasible basis; returns OPTIMAL or INFEASIBLE.

        Artificial columns are fixed at zero on this path, so only structural
        columns are priced.
        """
        n = self.n
        A = self.M[:, :n]
        movable = (self.hi > self.lo)[:n]
        d = cost[:n] - (cost[self.basis] @ self.Binv) @ A
        iters = 0
        while True:
            iters += 1
            if iters > self.max_iter:
                raise LpNumericalError("iteration limit reached in dual simplex", self.pivots)
            if self._since_refactor >= REFACTOR_EVERY:
                self.refactor()
                d = cost[:n] - (cost[self.basis] @ self.Binv) @ A
            xB = self.z[self.basis]
            loB = self.lo[self.basis]
            hiB = self.hi[self.basis]
            below = loB - xB
            above = xB - hiB
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= PRIMAL_TOL:
                return OPTIMAL
            raise_it = below[r] > 0
            row = self.Binv[r] @ A
            st = self.state[:n]
            can_up = movable & ((st == _LOWER) | (st == _FREE))
            can_down = movable & ((st == _UPPER) | (st == _FREE))
            if raise_it:
                elig = (can_up & (row < -PIVOT_TOL)) | (can_down & (row > PIVOT_TOL))
            else:
                elig = (can_up & (row > PIVOT_TOL)) | (can_down & (row < -PIVOT_TOL))
            if not elig.any():
                return INFEASIBLE
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(elig, np.abs(d) / np.abs(row), np.inf)
            j = int(np.argmin(ratio))

            col = self.Binv @ self.M[:, j]
            leaving = self.basis[r]
            target = loB[r] if raise_it else hiB[r]
            step = (xB[r] - target) / col[r]
            self.z[self.basis] = xB - step * col
            self.z[j] += step
            self.z[leaving] = target
            self.state[leaving] = _LOWER if raise_it else _UPPER
            self.state[j] = _BASIC
            self.basis[r] = j
            d = d - (d[j] / row[j]) * row
            d[j] = 0.0

            _eliminate(self.Binv, col, r)
            self.pivots += 1
            self._since_refactor += 1

    def warm_start(self) -> WarmStart:
        return WarmStart(self.basis.copy(), self.state.copy(), self.M[:, self.n :].diagonal().copy(), self.Binv.copy())

    def finish(self, lp: LinearProgram) -> LpSolution:
        n, m = self.n, self.m
        tol = 1e-7 * (1.0 + np.abs(lp.b).sum())
        z = np.clip(self.z[:n], lp.lo, lp.hi)
        resid = np.abs(lp.A @ z - lp.b).sum() if m else 0.0
        if resid > 0.01 * tol:
            self.refactor()
            z = np.clip(self.z[:n], lp.lo, lp.hi)
            resid = np.abs(lp.A @ z - lp.b).sum() if m else 0.0
        if resid > tol:
            raise LpNumericalError(f"constraint residual {resid:.3g} after final refactor", self.pivots)
        return LpSolution(OPTIMAL, z=z, objective_value=float(lp.c @ z), pivots=self.pivots, warm=self.warm_start())


def _solve_warm(lp: LinearProgram, warm: WarmStart) -> LpSolution | None:
    m, n = lp.shape
    if warm.basis.shape != (m,) or warm.state.shape != (n + m,):
        return None
    cost = np.concatenate([lp.c, np.zeros(m)])
    try:
        sx = _Simplex(lp, warm)
        if not sx.dual_feasible(cost):
            return None
        if sx.run_dual(cost) != OPTIMAL:
            return None
        if sx.run(cost) != OPTIMAL:
            return None
        return sx.finish(lp)
    except LpNumericalError:
        return None


def solve_lp(lp: LinearProgram, warm: WarmStart | None = None) -> LpSolution:
    """Solve a :class:`LinearProgram` (maximisation).

    ``warm`` is the :attr:`LpSolution.warm` of an earlier optimal solve of an
    LP differing only in ``b``; it is a hint, never needed for correctness.
    """
    if warm is not None:
        sol = _solve_warm(lp, warm)
        if sol is not None:
            return sol
    m, n = lp.shape
    sx = _Simplex(lp)
    phase1_cost = np.concatenate([np.zeros(n), -np.ones(m)])
    sx.run(phase1_cost)
    sx.refactor()
    infeas = float(np.abs(sx.z[n:]).sum())
    if infeas > PHASE1_TOL:
        return LpSolution(INFEASIBLE, pivots=sx.pivots, phase1_infeasibility=infeas)

    # artificials are pinned at zero from here on
    sx.hi[n:] = 0.0
    sx.z[n:] = np.where(sx.state[n:] == _BASIC, sx.z[n:], 0.0)
    sx.state[n:] = np.where(sx.state[n:] == _BASIC, _BASIC, _LOWER)
    phase2_cost = np.concatenate([lp.c, np.zeros(m)])
    status = sx.run(phase2_cost)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, pivots=sx.pivots)
    return sx.finish(lp)
