"""Align-and-steer policies for restless N-armed bandits under the average-reward criterion."""

from .chain import ChainStructure, ReachabilityCertificate, analyze_chain, find_certificate
from .control import (
    AlignAndSteer,
    BiasVector,
    ControlRuleError,
    SteeringRule,
    Trajectory,
    align_and_steer_control,
    bias_truncated,
    cec_window,
    delayed_align_trajectory,
    deterministic_trajectory,
    linear_steer,
    max_alignment_coef,
    mpc_steer,
)
from .lp import LinearProgram, LpNumericalError, LpSolution, solve_lp
from .model import (
    ArmModel,
    InfeasibleControlError,
    ModelError,
    builtin_model,
    check_feasible,
    grid_point,
    load_model,
    phi,
    population,
    reward,
    validate_model,
)
from .policies import InducedPolicy, policy_step, randomized_round, round_control
from .simulate import (
    NoiseSummary,
    PolicyFailure,
    SimConfig,
    SimResult,
    brute_force_dp,
    noise_stats,
    run_policy,
    sample_transition,
)
from .static import (
    StaticSolveError,
    StationaryPoint,
    complete_stationary_point,
    solve_conventional_static,
    solve_refined_static,
    stationary_point_violations,
    verify_stationary_point,
)

__version__ = "0.1.0"
