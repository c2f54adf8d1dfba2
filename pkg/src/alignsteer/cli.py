"""Command-line front end: solve, analyze, sweep and trajectory."""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import analyze_chain, find_certificate
from .control import DEFAULT_WINDOW, AlignAndSteer, ControlRuleError, SteeringRule
from .lp import LpNumericalError
from .model import ArmModel, ModelError, grid_point, load_model, population
from .policies import InducedPolicy, budget_units
from .simulate import PolicyFailure, SimConfig, run_policy
from .static import StaticSolveError, StationaryPoint, solve_conventional_static, solve_refined_static

log = logging.getLogger("alignsteer")

EXIT_INPUT = 2
EXIT_NUMERIC = 3

SWEEP_HEADER = ["N", "policy", "mean_reward", "std_error", "gap_to_Ve", "replications", "status"]
POLICIES = {"align-linear": "linear", "align-mpc": "mpc"}


class InputError(Exception):
    """Bad flags or model input (exit code 2)."""


def fmt(v: float) -> str:
    return f"{v:.9g}"


def _vector(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not out:
        raise argparse.ArgumentTypeError("N list is empty")
    return out


def _load(args) -> tuple[ArmModel, np.ndarray | None]:
    model, x_init = load_model(args.model)
    if getattr(args, "x_init", None) is not None:
        x_init = population(args.x_init, num_states=model.num_states)
    return model, x_init


def _stationary_point(model: ArmModel, x_init, conventional: bool) -> StationaryPoint:
    if conventional:
        return solve_conventional_static(model)
    if x_init is None:
        raise InputError("x_init required (in the model file or via --x-init) unless --conventional")
    return solve_refined_static(model, x_init)


def _metadata(args, model: ArmModel, **extra) -> str:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}
    meta = {"command": args.command, "version": __version__, "model_sha256": model.fingerprint(), "flags": flags}
    meta.update(extra)
    return "# " + json.dumps(meta, sort_keys=True)


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
        return
    buf = io.StringIO()
    yield buf
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def _policy(model: ArmModel, sp: StationaryPoint, args, N: int) -> InducedPolicy:
    steer = SteeringRule(model, POLICIES[args.policy], window=args.tw)
    return InducedPolicy(AlignAndSteer(sp, steer), N, model.alpha, args.rounding)


def _start(x_init, N: int) -> np.ndarray:
    X0 = grid_point(x_init, N)
    if np.abs(X0 - x_init).sum() > 1e-9:
        log.warning("x_init is not on the 1/%d grid; starting from %s", N, X0.tolist())
    return X0


def cmd_solve(args) -> int:
    model, x_init = _load(args)
    sp = _stationary_point(model, x_init, args.conventional)
    payload = sp.to_dict()
    payload["formulation"] = "conventional" if args.conventional else "refined"
    with _output(args.out) as fh:
        fh.write(json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_analyze(args) -> int:
    model, x_init = _load(args)
    out = {"chain": analyze_chain(model).to_dict()}
    if x_init is None and not args.conventional:
        out["certificate"] = None
        out["certificate_reason"] = "x_init required for the stationary point"
    else:
        sp = _stationary_point(model, x_init, args.conventional)
        cap = args.cap if args.cap is not None else 4 * model.num_states**2
        cert = find_certificate(model, sp, cap)
        out["x_star"] = sp.x_star.tolist()
        out["certificate"] = None if cert is None else cert.to_dict()
        if cert is None:
            out["certificate_reason"] = f"no certificate within cap {cap}"
    with _output(args.out) as fh:
        fh.write(json.dumps(out, indent=2) + "\n")
    return 0


def _check_sim_flags(args) -> None:
    if args.reps < 1:
        raise InputError("--reps must be >= 1")
    if args.T < 1:
        raise InputError("--T must be >= 1")
    if args.tw < 1:
        raise InputError("--tw must be >= 1")


def cmd_sweep(args) -> int:
    _check_sim_flags(args)
    model, x_init = _load(args)
    sp = _stationary_point(model, x_init, conventional=False)
    burn_in = args.T // 4 if args.burn_in is None else args.burn_in
    if not 0 <= burn_in < args.T:
        raise InputError("--burn-in must lie in [0, T)")

    rows = []
    failed = False
    for N in sorted(set(args.N)):
        row = {"N": str(N), "policy": args.policy, "mean_reward": "", "std_error": "", "gap_to_Ve": "",
               "replications": str(args.reps), "status": "ok"}
        try:
            budget_units(model.alpha, N)
        except ModelError:
            log.warning("skipping N=%d: alpha*N not integer", N)
            row["status"] = "alpha*N not integer"
            rows.append(row)
            continue
        cfg = SimConfig(N=N, T=args.T, burn_in=burn_in, seed=args.seed, replications=args.reps)
        try:
            res = run_policy(model, _policy(model, sp, args, N), _start(x_init, N), cfg, sp=sp,
                             workers=args.workers)
        except (PolicyFailure, LpNumericalError, ControlRuleError) as exc:
            log.error("N=%d failed: %s", N, exc)
            row["status"] = f"failed: {exc}".replace("\n", " ")
            failed = True
            rows.append(row)
            continue
        row.update(mean_reward=fmt(res.mean_reward), std_error=fmt(res.std_error),
                   gap_to_Ve=fmt(sp.value - res.mean_reward))
        rows.append(row)

    with _output(args.out) as fh:
        fh.write(_metadata(args, model, burn_in=burn_in, V_e=fmt(sp.value)) + "\n")
        writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_NUMERIC if failed else 0


def cmd_trajectory(args) -> int:
    _check_sim_flags(args)
    if args.stride < 0:
        raise InputError("--stride must be >= 0")
    if len(args.N) != 1:
        raise InputError("trajectory needs a single N")
    N = args.N[0]
    model, x_init = _load(args)
    sp = _stationary_point(model, x_init, conventional=False)
    cfg = SimConfig(N=N, T=args.T, burn_in=0, seed=args.seed, replications=1, record_delta_every=args.stride)
    res = run_policy(model, _policy(model, sp, args, N), _start(x_init, N), cfg, sp=sp)

    with _output(args.out) as fh:
        fh.write(_metadata(args, model, V_e=fmt(sp.value)) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        if args.stride > 0:
            writer.writerow(["t", "delta", "reward"])
            for (t, d), (_, r) in zip(res.delta_trace, res.reward_trace):
                writer.writerow([t, fmt(d), fmt(r)])
        else:
            writer.writerow(["t", "reward"])
            for t, r in res.reward_trace:
                writer.writerow([t, fmt(r)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alignsteer", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=True, help="model JSON file or builtin:<four-state|identity>")
        sp.add_argument("--x-init", type=_vector, default=None, help="initial population, e.g. 0.4,0,0.6,0")
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    def simulation(sp, default_N):
        sp.add_argument("--policy", choices=sorted(POLICIES), default="align-linear")
        sp.add_argument("--tw", type=int, default=DEFAULT_WINDOW, help="MPC look-ahead window")
        sp.add_argument("--N", type=_int_list, default=default_N, help="arm counts, comma separated")
        sp.add_argument("--T", type=int, default=10_000, help="horizon in steps")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--rounding", choices=["deterministic", "randomized"], default="deterministic")

    s = sub.add_parser("solve", help="solve the static problem and print the stationary point")
    common(s)
    s.add_argument("--conventional", action="store_true", help="use the conventional static problem")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("analyze", help="chain structure and reachability certificate")
    common(s)
    s.add_argument("--conventional", action="store_true")
    s.add_argument("--cap", type=int, default=None, help="largest T0 to try (default 4 S^2)")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="simulate the induced policy for several N")
    common(s)
    simulation(s, [10, 100, 1000])
    s.add_argument("--burn-in", type=int, default=None, help="discarded steps (default T/4)")
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--workers", type=int, default=1, help="processes for replications")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("trajectory", help="record delta and reward along one simulated run")
    common(s)
    simulation(s, [1000])
    s.add_argument("--stride", type=int, default=5, help="record every stride steps (0: reward only, every step)")
    s.set_defaults(func=cmd_trajectory, reps=1)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LpNumericalError, StaticSolveError, ControlRuleError, PolicyFailure) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
