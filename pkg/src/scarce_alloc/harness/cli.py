"""Command-line entry point.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .config import ExperimentConfig, load_config
from .output import emit_csv, emit_meta
from .runner import RunError, run_experiment, run_sweep

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
DEFAULT_RATIOS = "0.05,0.1,0.2,0.4,0.8"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _ratios(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ratio list {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file (default: packaged defaults)")
    common.add_argument("--seed", type=_seed, help="override root_seed")
    common.add_argument("--workers", type=_positive_int, default=1, help="worker threads for runs")

    parser = _Parser(prog="scarce-alloc", description="Scarce-resource allocation experiments.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run the policy comparison experiment")
    sim.add_argument("--out", type=Path, required=True, help="output directory")

    sweep = sub.add_parser("sweep", parents=[common], help="run the capacity-to-demand sweep")
    sweep.add_argument("--ratios", type=_ratios, default=_ratios(DEFAULT_RATIOS), help="comma-separated ratios")
    sweep.add_argument("--runs-per-ratio", type=_positive_int, default=50)
    sweep.add_argument("--out", type=Path, required=True, help="output directory")

    evi = sub.add_parser("evi", parents=[common], help="print decision metrics as CSV")
    evi.add_argument("--samples", type=_positive_int, help="Monte Carlo samples for EVI")
    evi.add_argument("--policy", default="greedy")

    seq = sub.add_parser("seqcare", help="sequential care solvers")
    seq_sub = seq.add_subparsers(dest="seq_command", metavar="command", required=True)
    solve = seq_sub.add_parser("solve", help="solve an MDP or constrained MDP problem file")
    solve.add_argument("--problem", type=Path, required=True)
    solve.add_argument("--tolerance", type=float, default=1e-9)
    solve.add_argument("--dual-iters", type=_positive_int, default=2000)

    sub.add_parser("validate", parents=[common], help="check a config file and echo it")
    return parser


def _config(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(root_seed=args.seed)
    return config


def _prepare_out(directory: Path) -> Path:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc.strerror or exc}") from None
    return directory


def _cmd_simulate(args, out) -> int:
    from ..decision_metrics import metric_report
    from .plotting import emit_chart

    config = _config(args)
    report = run_experiment(config, workers=args.workers)
    metrics = metric_report(config, report=report) if "greedy" in config.policies else None
    directory = _prepare_out(args.out)
    paths = [
        emit_csv(report, directory / "experiment.csv"),
        emit_chart(report, directory / "experiment.svg"),
        emit_meta(directory / "meta.txt", config, experiment=report, metrics=metrics),
    ]
    for path in paths:
        print(path, file=out)
    return EXIT_OK


def _cmd_sweep(args, out) -> int:
    from .plotting import emit_chart

    config = _config(args)
    report = run_sweep(config, args.ratios, args.runs_per_ratio, workers=args.workers)
    directory = _prepare_out(args.out)
    paths = [
        emit_csv(report, directory / "sweep.csv"),
        emit_chart(report, directory / "sweep.svg"),
        emit_meta(directory / "meta.txt", config, sweep=report),
    ]
    for path in paths:
        print(path, file=out)
    return EXIT_OK


def _cmd_evi(args, out) -> int:
    from ..decision_metrics import metric_report

    config = _config(args)
    report = metric_report(config, policy=args.policy, n_samples=args.samples, workers=args.workers)
    print("metric,value", file=out)
    for name, value in report.rows():
        print(f"{name},{value!r}", file=out)
    return EXIT_OK


def _vector(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _cmd_seqcare_solve(args, out) -> int:
    from ..seqcare import load_problem, solve_cmdp_lagrangian, value_iteration

    problem = load_problem(args.problem)
    if problem.cmdp is None:
        result = value_iteration(problem.mdp, args.tolerance)
        print(f"values {_vector(result.values)}", file=out)
        print(f"policy {' '.join(str(int(a)) for a in result.policy)}", file=out)
        if problem.start is not None:
            print(f"value {float(result.values @ problem.start)!r}", file=out)
        return EXIT_OK
    solution = solve_cmdp_lagrangian(problem.cmdp, problem.start, n_dual_iters=args.dual_iters)
    print(f"value {solution.value!r}", file=out)
    print(f"multipliers {_vector(solution.multipliers)}", file=out)
    print(f"consumptions {_vector(solution.consumptions)}", file=out)
    print(f"budgets {_vector(problem.cmdp.budgets)}", file=out)
    print(f"feasible {str(solution.feasible).lower()}", file=out)
    print(f"dual_bound {solution.dual_bound!r}", file=out)
    for weight, policy in zip(solution.mixture.weights, solution.mixture.policies):
        print(f"mixture {float(weight)!r} policy {' '.join(str(int(a)) for a in policy)}", file=out)
    return EXIT_OK


def _cmd_validate(args, out) -> int:
    config = _config(args)
    print(f"ok {args.config or 'packaged defaults'}", file=out)
    for line in config.to_lines():
        print(line, file=out)
    return EXIT_OK


def _is_validation(exc: BaseException) -> bool:
    if isinstance(exc, RunError):
        return _is_validation(exc.cause)
    return isinstance(exc, ValidationError)


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    handler = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "evi": _cmd_evi,
        "seqcare": _cmd_seqcare_solve,
        "validate": _cmd_validate,
    }[args.command]
    try:
        with np.errstate(all="ignore"):
            return handler(args, out)
    except Exception as exc:
        code = EXIT_INVALID if _is_validation(exc) else EXIT_RUNTIME
        print(f"error: {exc}", file=err)
        return code


if __name__ == "__main__":
    sys.exit(main())
