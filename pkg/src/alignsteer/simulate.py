"""Stochastic N-armed bandit simulation, noise diagnostics and a tiny exact DP."""

from __future__ import annotations

import copy
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .control import max_alignment_coef
from .model import ArmModel, InfeasibleControlError, ModelError, check_feasible, to_counts
from .policies import InducedPolicy, budget_units, policy_step
from .static import StationaryPoint


class PolicyFailure(RuntimeError):
    """A policy raised while being simulated."""


def step_rng(seed: int, replication: int, t: int) -> np.random.Generator:
    """Counter-based stream for one (replication, step) pair.

    Streams are derived from the key (seed, replication, t) alone, so the
    order in which replications are run cannot change any draw.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(replication, t))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimConfig:
    N: int
    T: int = 10_000
    burn_in: int | None = None
    seed: int = 0
    replications: int = 5
    record_delta_every: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.T < 1:
            raise ValueError("T must be positive")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.T // 4)
        if not 0 <= self.burn_in < self.T:
            raise ValueError(f"burn_in must lie in [0, T), got {self.burn_in}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.record_delta_every < 0:
            raise ValueError("record_delta_every must be >= 0")


@dataclass
class SimResult:
    mean_reward: float
    std_error: float
    per_replication_means: list[float]
    delta_trace: list[tuple[int, float]] | None = None
    reward_trace: list[tuple[int, float]] = field(default_factory=list)


def sample_transition(model: ArmModel, X, U, N: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the next grid population given grid state X and grid control U.

    Every state's passive and active arms move independently, i.e. one
    multinomial draw per (state, action) row.
    """
    x_counts = to_counts(X, N)
    u_counts = to_counts(U, N)
    if not check_feasible(X, U, model.alpha) or np.any(u_counts > x_counts) or np.any(u_counts < 0):
        raise InfeasibleControlError("sample_transition needs U in U^N(X)")
    passive = rng.multinomial(x_counts - u_counts, model.P0)
    active = rng.multinomial(u_counts, model.P1)
    nxt = passive.sum(axis=0) + active.sum(axis=0)
    return nxt / N


def _instant_reward(model: ArmModel, X: np.ndarray, U: np.ndarray) -> float:
    return float((X - U) @ model.r0 + U @ model.r1)


def _replicate(model: ArmModel, policy: InducedPolicy, X0: np.ndarray, cfg: SimConfig, rep: int,
               sp: StationaryPoint | None):
    policy = copy.deepcopy(policy)  # fresh MPC warm-start chain per replication
    N = cfg.N
    X = X0
    total = 0.0
    stride = cfg.record_delta_every
    trace_on = rep == 0
    deltas = [] if (trace_on and stride > 0 and sp is not None) else None
    rewards = []
    for t in range(cfg.T):
        rng = step_rng(cfg.seed, rep, t)
        try:
            U = policy_step(policy, X, rng)
        except Exception as exc:
            raise PolicyFailure(f"policy failed at step {t} of replication {rep}: {exc}") from exc
        r = _instant_reward(model, X, U)
        if t >= cfg.burn_in:
            total += r
        if trace_on and t % max(stride, 1) == 0:
            rewards.append((t, r))
            if deltas is not None:
                deltas.append((t, max_alignment_coef(X, sp.x_star)))
        X = sample_transition(model, X, U, N, rng)
    return total / (cfg.T - cfg.burn_in), deltas, rewards


def run_policy(model: ArmModel, policy: InducedPolicy, X0, cfg: SimConfig,
               sp: StationaryPoint | None = None, workers: int = 1) -> SimResult:
    """Time-averaged reward of ``policy`` over ``cfg.replications`` independent runs.

    Traces (delta and reward at stride ``cfg.record_delta_every``) come from
    replication 0; delta needs the stationary point ``sp``.
    """
    if policy.N != cfg.N:
        raise ValueError(f"policy built for N={policy.N}, config has N={cfg.N}")
    budget_units(model.alpha, cfg.N)
    X0 = to_counts(X0, cfg.N)
    if X0.sum() != cfg.N:
        raise ModelError("X0 is not on the simplex")
    X0 = X0 / cfg.N

    reps = range(cfg.replications)
    if workers > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_replicate, model, policy, X0, cfg, rep, sp) for rep in reps]
            outs = [f.result() for f in futures]
    else:
        outs = [_replicate(model, policy, X0, cfg, rep, sp) for rep in reps]

    means = [o[0] for o in outs]
    mean = float(np.mean(means))
    se = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0
    return SimResult(mean, se, means, outs[0][1], outs[0][2])


class NoiseSummary(NamedTuple):
    mean_l1_of_mean: float
    mean_l1: float
    mean_l1_se: float
    tail_freq: float
    tail_se: float
    xi: float


def noise_stats(model: ArmModel, X, U, N: int, rng: np.random.Generator, reps: int = 10_000,
                xi: float | None = None) -> NoiseSummary:
    """Empirical moments of the transition noise X' - phi(X, U) from ``reps`` draws.

    ``xi`` defaults to S / sqrt(N).
    """
    S = model.num_states
    xi = S / math.sqrt(N) if xi is None else xi
    x_counts = to_counts(X, N)
    u_counts = to_counts(U, N)
    X = x_counts / N
    U = u_counts / N
    mean_next = (X - U) @ model.P0 + U @ model.P1
    passive = rng.multinomial(x_counts - u_counts, model.P0, size=(reps, S)).sum(axis=1)
    active = rng.multinomial(u_counts, model.P1, size=(reps, S)).sum(axis=1)
    noise = (passive + active) / N - mean_next
    l1 = np.abs(noise).sum(axis=1)
    tail = (l1 >= xi).astype(float)
    return NoiseSummary(
        mean_l1_of_mean=float(np.abs(noise.mean(axis=0)).sum()),
        mean_l1=float(l1.mean()),
        mean_l1_se=float(l1.std(ddof=1) / math.sqrt(reps)),
        tail_freq=float(tail.mean()),
        tail_se=float(tail.std(ddof=1) / math.sqrt(reps)),
        xi=xi,
    )


# exact finite-horizon dynamic programming on tiny instances

MAX_DP_STATES, MAX_DP_ARMS, MAX_DP_HORIZON = 3, 6, 5


def _compositions(n: int, parts: int):
    """All nonnegative integer vectors of length ``parts`` summing to ``n``."""
    for cuts in itertools.combinations(range(n + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(n + parts - 1 - prev - 1)
        yield tuple(out)


@lru_cache(maxsize=None)
def _multinomial_pmf(n: int, probs: tuple[float, ...]) -> tuple[tuple[tuple[int, ...], float], ...]:
    out = []
    for k in _compositions(n, len(probs)):
        p = math.factorial(n)
        for ki, pi in zip(k, probs):
            p = p / math.factorial(ki) * pi**ki
        if p > 0.0:
            out.append((k, p))
    return tuple(out)


def _next_distribution(model: ArmModel, x: tuple[int, ...], u: tuple[int, ...]) -> dict[tuple[int, ...], float]:
    dist = {tuple([0] * len(x)): 1.0}
    for s in range(len(x)):
        for n, row in ((x[s] - u[s], model.P0[s]), (u[s], model.P1[s])):
            if n == 0:
                continue
            pmf = _multinomial_pmf(n, tuple(float(p) for p in row))
            new = {}
            for k0, p0 in dist.items():
                for k1, p1 in pmf:
                    key = tuple(a + b for a, b in zip(k0, k1))
                    new[key] = new.get(key, 0.0) + p0 * p1
            dist = new
    return dist


def brute_force_dp(model: ArmModel, N: int, X0, T: int) -> float:
    """Optimal expected total per-arm reward over T steps of the N-armed bandit.

    Backward induction over every grid state and every control in U^N with
    exact transition probabilities. Limited to S <= 3, N <= 6, T <= 5.
    """
    S = model.num_states
    if S > MAX_DP_STATES or N > MAX_DP_ARMS or T > MAX_DP_HORIZON:
        raise ValueError(
            f"instance too large for exact DP (S={S}, N={N}, T={T}; "
            f"limits {MAX_DP_STATES}, {MAX_DP_ARMS}, {MAX_DP_HORIZON})"
        )
    budget = budget_units(model.alpha, N)
    start = tuple(int(c) for c in to_counts(X0, N))
    states = list(_compositions(N, S))

    controls = {}
    for x in states:
        ranges = [range(min(xs, budget) + 1) for xs in x]
        controls[x] = [u for u in itertools.product(*ranges) if sum(u) == budget]

    r0, r1 = model.r0, model.r1
    moves = {
        (x, u): _next_distribution(model, x, u) for x in states for u in controls[x]
    }
    value = {x: 0.0 for x in states}
    for _ in range(T):
        new = {}
        for x in states:
            best = -math.inf
            for u in controls[x]:
                r = sum((x[s] - u[s]) * r0[s] + u[s] * r1[s] for s in range(S)) / N
                cont = sum(p * value[y] for y, p in moves[(x, u)].items())
                best = max(best, r + cont)
            new[x] = best
        value = new
    return value[start]
