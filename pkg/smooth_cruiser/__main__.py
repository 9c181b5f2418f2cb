import argparse
import io
import logging
import sys
from typing import List, Optional

import numpy as np

from smooth_cruiser.config import RuntimeConfig, load_config
from smooth_cruiser.core.complexity import (
    BoundInputs,
    accuracy_grid,
    bound_curve,
    lambda_sweep,
)
from smooth_cruiser.core.environments import (
    DEFAULT_REWARD_NOISE,
    EnvSpec,
    GenerativeOracle,
    build_env,
)
from smooth_cruiser.core.errors import InvalidArgumentError, SmoothCruiserError
from smooth_cruiser.core.exact_solver import (
    DEFAULT_TOL,
    regularization_gap,
    regularization_gap_bound,
    solve_regularized,
    solve_unregularized,
)
from smooth_cruiser.core.operators import OPERATOR_KINDS, build_operator
from smooth_cruiser.core.parameters import PlannerConfig
from smooth_cruiser.core.planner import smooth_cruiser
from smooth_cruiser.core.validation import run_consistency
from smooth_cruiser.schemas.reports import (
    BOUND_CURVE_COLUMNS,
    LAMBDA_SWEEP_COLUMNS,
    RUN_COLUMNS,
    PlanReport,
    RunRow,
    ValueTableReport,
    to_json_text,
    write_csv,
)
from smooth_cruiser.selftest import parse_corruptions, run_selftest
from smooth_cruiser.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of printing usage and exiting."""

    def error(self, message):
        raise UsageError(message)


def _env_spec(text: str) -> EnvSpec:
    try:
        return EnvSpec.parse(text)
    except InvalidArgumentError as e:
        raise argparse.ArgumentTypeError(e.message)


def _common(parser: argparse.ArgumentParser, lam: float, gamma: float = 0.2):
    parser.add_argument("--gamma", type=float, default=gamma, help="Discount factor")
    parser.add_argument(
        "--lambda", dest="lam", type=float, default=lam, help="Regularization"
    )
    parser.add_argument("--actions", "-K", dest="actions", type=int, default=None)
    parser.add_argument("--delta-prime", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="Output path (default stdout)")


def _operator_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--operator", choices=OPERATOR_KINDS, default="logsumexp_max")
    parser.add_argument(
        "--smoothness", type=float, default=None, help="Override L for sqrt_reg"
    )


def build_parser() -> CliParser:
    parser = CliParser(
        prog="smooth-cruiser",
        description="Planning with smooth Bellman operators from a generative model",
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=CliParser)
    subparsers.required = True

    solve = subparsers.add_parser("solve", help="Exact regularized value function")
    _common(solve, lam=10.0)
    _operator_flags(solve)
    solve.add_argument("--env", type=_env_spec, required=True)
    solve.add_argument("--tol", type=float, default=DEFAULT_TOL)
    solve.add_argument(
        "--unregularized", action="store_true", help="Also solve the hard-max MDP"
    )
    solve.add_argument("--format", choices=("json",), default="json")
    solve.set_defaults(handler=cmd_solve)

    plan = subparsers.add_parser("plan", help="Run the planner from one state")
    _common(plan, lam=10.0)
    _operator_flags(plan)
    plan.add_argument("--env", type=_env_spec, required=True)
    plan.add_argument("--state", type=int, default=0)
    plan.add_argument("--epsilon", type=float, required=True)
    plan.add_argument("--n-scale", type=float, default=1.0)
    plan.add_argument("--max-depth-slack", type=int, default=2)
    plan.add_argument("--parallel", action="store_true")
    plan.add_argument("--reward-noise", type=float, default=0.0)
    plan.add_argument(
        "--noisy-rewards",
        action="store_true",
        help=f"Shortcut for --reward-noise {DEFAULT_REWARD_NOISE}",
    )
    plan.add_argument("--allow-condition-violation", action="store_true")
    plan.add_argument("--exact", action="store_true", help="Report the exact value too")
    plan.add_argument("--format", choices=("json",), default="json")
    plan.set_defaults(handler=cmd_plan)

    complexity = subparsers.add_parser("complexity", help="Recurrence vs bounds")
    _common(complexity, lam=0.1)
    complexity.add_argument("--points", type=int, default=40)
    complexity.add_argument(
        "--depth-rounding", choices=("continuous", "ceil"), default="continuous"
    )
    complexity.add_argument("--format", choices=("csv", "json"), default="csv")
    complexity.set_defaults(handler=cmd_complexity)

    sweep = subparsers.add_parser("lambda-sweep", help="Calls as a function of lambda")
    _common(sweep, lam=1.0)
    sweep.add_argument("--rel-err", type=float, default=0.01)
    sweep.add_argument("--lambda-min", type=float, default=1e-3)
    sweep.add_argument("--lambda-max", type=float, default=1e2)
    sweep.add_argument("--points", type=int, default=20)
    sweep.add_argument(
        "--depth-rounding", choices=("continuous", "ceil"), default="continuous"
    )
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.set_defaults(handler=cmd_lambda_sweep)

    consistency = subparsers.add_parser("consistency", help="Bias check harness")
    _common(consistency, lam=10.0)
    _operator_flags(consistency)
    consistency.add_argument("--env", type=_env_spec, required=True)
    consistency.add_argument("--state", type=int, default=None)
    consistency.add_argument("--epsilon", type=float, required=True)
    consistency.add_argument("--n-sim", type=int, default=32723)
    consistency.add_argument("--noise-scale", type=float, default=1.0)
    consistency.add_argument("--reward-noise", type=float, default=0.0)
    consistency.add_argument("--parallel", action="store_true")
    consistency.add_argument("--runs-out", default=None, help="Per-run CSV path")
    consistency.add_argument("--format", choices=("json",), default="json")
    consistency.set_defaults(handler=cmd_consistency)

    selftest = subparsers.add_parser("selftest", help="Run the fast check suite")
    selftest.add_argument("--format", choices=("text", "json"), default="text")
    selftest.add_argument("--out", default=None)
    selftest.add_argument("--corrupt", action="append", help=argparse.SUPPRESS)
    selftest.set_defaults(handler=cmd_selftest)

    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows, columns) -> str:
    buffer = io.StringIO()
    write_csv(buffer, rows, columns)
    return buffer.getvalue()


def _check_actions(args, n_actions: int) -> None:
    if args.actions is not None and args.actions != n_actions:
        raise InvalidArgumentError(
            f"-K {args.actions} does not match the environment's {n_actions} actions"
        )


def cmd_solve(args, runtime: RuntimeConfig) -> int:
    model = build_env(args.env)
    _check_actions(args, model.n_actions)
    op = build_operator(args.operator, args.lam, model.n_actions, args.smoothness)
    table = solve_regularized(model, op, args.gamma, args.tol)
    report = ValueTableReport(
        env=str(args.env),
        operator=op.kind,
        gamma=args.gamma,
        lam=args.lam,
        V=table.v.tolist(),
        Q=table.q.tolist(),
        residual=table.residual,
        iterations=table.iterations,
        policy=table.policy(op).tolist(),
        regularization_gap_bound=regularization_gap_bound(op, args.gamma),
    )
    if args.unregularized:
        hard = solve_unregularized(model, args.gamma, args.tol)
        report.V_unregularized = hard.v.tolist()
        report.regularization_gap = regularization_gap(table, hard)
    _emit(to_json_text(report), args.out)
    return EXIT_OK


def _planner_config(args, op, **extra) -> PlannerConfig:
    return PlannerConfig.for_operator(
        op,
        gamma=args.gamma,
        delta_prime=args.delta_prime,
        parallel=args.parallel,
        **extra,
    )


def cmd_plan(args, runtime: RuntimeConfig) -> int:
    noise = DEFAULT_REWARD_NOISE if args.noisy_rewards else args.reward_noise
    model = build_env(args.env, reward_noise=noise)
    _check_actions(args, model.n_actions)
    op = build_operator(args.operator, args.lam, model.n_actions, args.smoothness)
    cfg = _planner_config(
        args,
        op,
        n_scale=args.n_scale,
        max_depth_slack=args.max_depth_slack,
        max_workers=runtime.workers,
        allow_condition_violation=args.allow_condition_violation,
    )
    seed = runtime.resolve_seed(args.seed)
    oracle = GenerativeOracle.seeded(model, seed)
    result = smooth_cruiser(cfg, op, oracle, args.state, args.epsilon)
    report = PlanReport(
        env=str(args.env),
        operator=op.kind,
        state=args.state,
        epsilon=args.epsilon,
        gamma=args.gamma,
        lam=args.lam,
        delta_prime=args.delta_prime,
        n_scale=args.n_scale,
        seed=seed,
        estimate=result.estimate,
        oracle_calls=result.oracle_calls,
        predicted_calls=result.predicted_calls,
        max_recursion_depth_seen=result.max_recursion_depth_seen,
        q_estimate=result.q_estimate,
        kappa=cfg.kappa,
        v_max=cfg.v_max,
    )
    if args.exact:
        report.v_exact = float(solve_regularized(model, op, args.gamma).v[args.state])
    _emit(to_json_text(report), args.out)
    return EXIT_OK


def cmd_complexity(args, runtime: RuntimeConfig) -> int:
    inputs = BoundInputs.create(
        args.gamma,
        args.lam,
        args.actions or 2,
        args.delta_prime,
        continuous_depth=args.depth_rounding == "continuous",
    )
    rows = bound_curve(inputs, accuracy_grid(inputs.kappa, args.points))
    if args.format == "json":
        _emit(to_json_text(rows), args.out)
    else:
        _emit(_csv_text(rows, BOUND_CURVE_COLUMNS), args.out)
    return EXIT_OK


def cmd_lambda_sweep(args, runtime: RuntimeConfig) -> int:
    if not 0.0 < args.lambda_min <= args.lambda_max:
        raise InvalidArgumentError("need 0 < --lambda-min <= --lambda-max")
    grid = np.geomspace(args.lambda_min, args.lambda_max, args.points).tolist()
    rows = lambda_sweep(
        args.gamma,
        args.actions or 2,
        args.delta_prime,
        args.rel_err,
        grid,
        continuous_depth=args.depth_rounding == "continuous",
    )
    if args.format == "json":
        _emit(to_json_text(rows), args.out)
    else:
        _emit(_csv_text(rows, LAMBDA_SWEEP_COLUMNS), args.out)
    return EXIT_OK


def cmd_consistency(args, runtime: RuntimeConfig) -> int:
    n_actions = 2 if args.env.family == "chain" else 4
    _check_actions(args, n_actions)
    op = build_operator(args.operator, args.lam, n_actions, args.smoothness)
    cfg = _planner_config(args, op, max_workers=runtime.workers)
    state = args.env.reference_state if args.state is None else args.state
    report = run_consistency(
        cfg,
        op,
        args.env,
        state,
        args.epsilon,
        args.n_sim,
        runtime.resolve_seed(args.seed),
        keep_runs=args.runs_out is not None,
        reward_noise=args.reward_noise,
        noise_scale=args.noise_scale,
    )
    if args.runs_out:
        rows = [RunRow(run_index=i, output=x) for i, x in enumerate(report.runs)]
        _emit(_csv_text(rows, RUN_COLUMNS), args.runs_out)
        report.runs = None
    _emit(to_json_text(report), args.out)
    return EXIT_OK


def cmd_selftest(args, runtime: RuntimeConfig) -> int:
    results = run_selftest(parse_corruptions(args.corrupt))
    if args.format == "json":
        _emit(to_json_text(results), args.out)
    else:
        lines = [
            f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results
        ]
        passed = sum(r.passed for r in results)
        lines.append(f"{passed}/{len(results)} checks passed")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INTERNAL


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        runtime = load_config()
        setup_logging(runtime.log_level, runtime.log_file)
        return args.handler(args, runtime)
    except SmoothCruiserError as e:
        logger.debug(f"{args.command} failed: {e}", exc_info=True)
        print(e.diagnostic(), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unhandled error in {args.command}: {e}", exc_info=True)
        print(f"error: internal_error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
