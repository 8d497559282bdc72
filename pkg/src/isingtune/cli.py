"""Command-line entry point: ``isingtune {tune,compare,encode,solve}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .annealer import DEFAULT_PARAMS, BudgetMode, SolveBudget, SolverParams, penalty_weight, solve
from .harness import (
    ConfigFileError,
    ExperimentConfig,
    compare_methods,
    default_output_dir,
    format_comparison,
    load_config,
    load_problem,
    run_experiment,
)
from .problems import ParseError


def _kind(path: str, kind: str | None) -> str:
    if kind:
        return kind
    return "tsp" if Path(path).suffix.lower() == ".tsp" else "qap"


def _add_problem_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("problem", nargs=None if required else "?", help="TSPLIB .tsp or QAPLIB .dat file")
    p.add_argument("--type", dest="kind", choices=("tsp", "qap"),
                   help="problem type (default: inferred from the file suffix)")


def _add_budget_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=float, help="run-time budget per solver call (default 30)")
    p.add_argument("--budget-mode", choices=[m.value for m in BudgetMode],
                   help="logical sweeps (default) or wall-clock seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isingtune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="run a multi-seed tuning experiment")
    _add_problem_args(tune, required=False)
    tune.add_argument("--config", type=Path, help="INI config file; flags override it")
    tune.add_argument("--n", type=int, help="maximum number of trials")
    tune.add_argument("--m", type=int, help="warm-up length before range narrowing")
    tune.add_argument("--l", type=int, help="trials without improvement before stopping")
    tune.add_argument("--gamma", type=float, help="range narrowing divisor")
    tune.add_argument("--t-coeff", type=float, help="objective coefficient (default: budget)")
    tune.add_argument("--sampler", choices=("random", "tpe"))
    fc = tune.add_mutually_exclusive_group()
    fc.add_argument("--fast-convergence", dest="fast_convergence", action="store_true", default=None)
    fc.add_argument("--no-fast-convergence", dest="fast_convergence", action="store_false")
    _add_budget_args(tune)
    tune.add_argument("--seeds", type=lambda s: tuple(int(x) for x in s.split(",")),
                      help="comma-separated RNG seeds (default 0,1,2,3,4)")
    tune.add_argument("--output", type=Path,
                      help=f"output directory (default ${{ISINGTUNE_OUTPUT_DIR}} or ./results)")
    tune.add_argument("--workers", type=int, help="seeds run in parallel processes")
    tune.add_argument("--label", help="method name used in comparisons")

    compare = sub.add_parser("compare", help="pairwise GAP between experiment outputs")
    compare.add_argument("reports", nargs="+", type=Path, help="experiment output directories")

    encode = sub.add_parser("encode", help="print statistics of the encoded BQP")
    _add_problem_args(encode)

    one = sub.add_parser("solve", help="single annealer call with explicit parameters")
    _add_problem_args(one)
    for name, default in DEFAULT_PARAMS.as_dict().items():
        one.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int, default=default)
    _add_budget_args(one)
    one.add_argument("--seed", type=int, default=0)
    return parser


def _tune(args: argparse.Namespace) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("n", "m", "l", "gamma", "t_coeff", "sampler", "fast_convergence", "budget",
                    "budget_mode", "seeds", "output", "workers", "label", "kind")
    }
    if args.problem:
        overrides["problem"] = Path(args.problem)
        overrides["kind"] = _kind(args.problem, args.kind)
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        if not args.problem:
            raise ConfigFileError("either a problem file or --config is required")
        values = {k: v for k, v in overrides.items() if v is not None}
        values.setdefault("output", default_output_dir())
        config = ExperimentConfig(**values)
    summary = run_experiment(config)
    print(json.dumps({k: summary[k] for k in ("method", "instance", "mean_trials", "mean_best_e_p")}))
    return 0


def _encode(args: argparse.Namespace) -> int:
    name, bqp = load_problem(args.problem, _kind(args.problem, args.kind))
    print(json.dumps({
        "instance": name,
        "num_vars": bqp.num_vars,
        "q_obj_nnz": int(bqp.q_obj.nnz),
        "q_pen_nnz": int(bqp.q_pen.nnz),
        "pen_offset": bqp.pen_offset,
        "inequalities": len(bqp.inequalities),
        "penalty_weight": penalty_weight(bqp),
    }))
    return 0


def _solve(args: argparse.Namespace) -> int:
    _, bqp = load_problem(args.problem, _kind(args.problem, args.kind))
    params = SolverParams(**{k: getattr(args, k) for k in DEFAULT_PARAMS.as_dict()})
    budget = SolveBudget(args.budget or 30.0, BudgetMode(args.budget_mode or "logical"))
    report = solve(bqp, params, budget, args.seed)
    print(json.dumps({
        "params": params.as_dict(),
        "feasible_found": report.feasible_found,
        "best_energy": report.best_energy,
        "time_found": report.time_found,
        "budget_used": report.budget_used,
        "num_attempts": report.num_attempts,
        "restarts": report.restarts,
    }))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "tune":
            return _tune(args)
        if args.command == "compare":
            sys.stdout.write(format_comparison(compare_methods(args.reports)))
            return 0
        if args.command == "encode":
            return _encode(args)
        return _solve(args)
    except (ConfigFileError, ParseError, ValueError, FileNotFoundError) as exc:
        print(f"isingtune: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
