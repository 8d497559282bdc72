"""Experiment orchestration: multi-seed studies, convergence curves, GAP tables.

An experiment writes three files into its output directory:

``trials.csv``
    one row per (seed, trial) with the suggested parameters and outcome;
``curve.csv``
    best-so-far energy and objective per seed after every trial, plus the
    mean over seeds (studies that stopped early carry their last value);
``summary.json``
    per-seed best parameters, termination reasons, the mean convergence trial
    and a baseline run with the solver's default parameters.

Each seed first writes ``seed-<s>.csv`` (flushed after every trial) and
``seed-<s>.json`` once finished; a rerun skips seeds whose JSON exists.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .annealer import DEFAULT_PARAMS, BudgetMode, SolveBudget
from .problems import encode_qap, encode_tsp, load_instance
from .qubo import Bqp
from .samplers import default_space
from .tuner import Solver, Study, Trial, TunerConfig, annealer_solver, compute_gap, run_study

__all__ = [
    "ComparisonError",
    "ConfigFileError",
    "ExperimentConfig",
    "compare_methods",
    "format_comparison",
    "load_config",
    "load_problem",
    "run_experiment",
]

log = logging.getLogger(__name__)

OUTPUT_ENV = "ISINGTUNE_OUTPUT_DIR"


class ConfigFileError(ValueError):
    pass


class ComparisonError(ValueError):
    pass


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: Path
    kind: str = "tsp"
    n: int = 1000
    m: int = 150
    l: int = 150  # noqa: E741
    gamma: float = 4.0
    sampler: str = "tpe"
    fast_convergence: bool = False
    budget: float = 30.0
    budget_mode: str = "logical"
    t_coeff: float | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    output: Path = field(default_factory=default_output_dir)
    workers: int = 1
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "problem", Path(self.problem))
        object.__setattr__(self, "output", Path(self.output))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigFileError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigFileError(f"duplicate seeds in {self.seeds}")
        if self.kind not in ("tsp", "qap"):
            raise ConfigFileError(f"problem type must be tsp or qap, got {self.kind!r}")
        if not self.label:
            method = "fastconv" if self.fast_convergence else self.sampler
            object.__setattr__(self, "label", method)

    def tuner_config(self) -> TunerConfig:
        return TunerConfig(
            n=self.n, m=self.m, l=self.l, gamma=self.gamma, t_coeff=self.t_coeff,
            budget=SolveBudget(self.budget, BudgetMode(self.budget_mode)),
            sampler=self.sampler, fast_convergence=self.fast_convergence,
        )

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        out["problem"] = str(self.problem)
        out["output"] = str(self.output)
        out["seeds"] = list(self.seeds)
        return out


# keys accepted in each config-file section, mapped to ExperimentConfig fields
_SECTIONS: dict[str, dict[str, str]] = {
    "problem": {"file": "problem", "type": "kind"},
    "tuner": {
        "n": "n", "m": "m", "l": "l", "gamma": "gamma", "sampler": "sampler",
        "fast_convergence": "fast_convergence", "t_coeff": "t_coeff",
    },
    "annealer": {"budget": "budget", "budget_mode": "budget_mode"},
    "harness": {"seeds": "seeds", "output": "output", "workers": "workers", "label": "label"},
}

_INT_FIELDS = {"n", "m", "l", "workers"}
_FLOAT_FIELDS = {"gamma", "budget", "t_coeff"}


def _convert(key: str, raw: str, section: configparser.SectionProxy, option: str) -> Any:
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key == "fast_convergence":
        return section.getboolean(option)
    if key == "seeds":
        return tuple(int(tok) for tok in raw.replace(",", " ").split())
    return raw


def read_config_values(path: str | Path) -> dict[str, Any]:
    """Parse an INI config file into ExperimentConfig keyword arguments."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigFileError(f"{path}: {exc}") from None
    values: dict[str, Any] = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigFileError(f"{path}: unknown section [{name}]")
        section = parser[name]
        for option, raw in section.items():
            if option not in _SECTIONS[name]:
                raise ConfigFileError(f"{path}: unknown key {option!r} in [{name}]")
            key = _SECTIONS[name][option]
            try:
                values[key] = _convert(key, raw, section, option)
            except ValueError as exc:
                raise ConfigFileError(f"{path}: [{name}] {option}: {exc}") from None
    if "problem" in values and not Path(values["problem"]).is_absolute():
        values["problem"] = path.parent / values["problem"]
    return values


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    values = read_config_values(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "problem" not in values:
        raise ConfigFileError(f"{path}: [problem] file is required")
    return ExperimentConfig(**values)


def load_problem(path: str | Path, kind: str) -> tuple[str, Bqp]:
    inst = load_instance(path, kind)
    bqp = encode_tsp(inst) if kind == "tsp" else encode_qap(inst)
    return inst.name, bqp


# ---------------------------------------------------------------------------
# running


def _trial_header(param_names: Sequence[str]) -> list[str]:
    return ["seed", "trial", *param_names, "e_p", "t_ep", "objective", "solver_seed"]


def _fmt(value: float) -> str:
    return repr(float(value))


def _trial_row(seed: int, trial: Trial, param_names: Sequence[str]) -> list[str]:
    return [
        str(seed), str(trial.index), *(str(trial.params[p]) for p in param_names),
        "" if trial.e_p is None else str(trial.e_p),
        _fmt(trial.t_ep),
        "inf" if math.isinf(trial.objective) else _fmt(trial.objective),
        str(trial.solver_seed),
    ]


def _seed_summary(study: Study) -> dict[str, Any]:
    best = study.trials[study.best_trial - 1] if study.best_trial else None
    return {
        "seed": study.rng_seed,
        "num_trials": study.num_trials,
        "termination": study.termination,
        "convergence_trial": study.num_trials if study.config.fast_convergence else None,
        "best_trial": study.best_trial,
        "best_e_p": study.best_emin,
        "best_params": study.best_params,
        "best_t_ep": best.t_ep if best else None,
        "best_solver_seed": best.solver_seed if best else None,
        "narrowed_at": study.narrowed_at,
        "final_ranges": {s.name: [s.current_min, s.current_max] for s in study.space},
        "best_energy_curve": study.best_energy_curve(),
        "best_objective_curve": [None if math.isinf(v) else v for v in study.best_objective_curve()],
    }


def _run_seed(job: tuple[ExperimentConfig, Bqp, int, Solver]) -> dict[str, Any]:
    config, bqp, seed, solver = job
    out = config.output
    done_file = out / f"seed-{seed}.json"
    if done_file.exists():
        return json.loads(done_file.read_text())
    names = default_space().names
    partial = out / f"seed-{seed}.csv"
    with partial.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_trial_header(names))

        def record(study: Study, trial: Trial) -> None:
            writer.writerow(_trial_row(seed, trial, names))
            fh.flush()

        study = run_study(bqp, config.tuner_config(), seed, solver=solver, on_trial=record)
    summary = _seed_summary(study)
    done_file.write_text(json.dumps(summary))
    return summary


def _baseline(config: ExperimentConfig, bqp: Bqp, solver: Solver) -> dict[str, Any]:
    budget = config.tuner_config().budget
    rows = []
    for seed in config.seeds:
        report = solver(bqp, DEFAULT_PARAMS.as_dict(), budget, seed)
        rows.append({
            "seed": seed,
            "e_p": int(report.best_energy) if report.feasible_found else None,
            "t_ep": float(report.time_found) if report.feasible_found else None,
        })
    energies = [r["e_p"] for r in rows if r["e_p"] is not None]
    return {
        "params": DEFAULT_PARAMS.as_dict(),
        "runs": rows,
        "mean_e_p": float(np.mean(energies)) if energies else None,
    }


def _carry(series: list, length: int) -> list:
    return series + [series[-1]] * (length - len(series)) if series else [None] * length


def _mean_or_blank(values: Iterable[float | None]) -> str:
    values = list(values)
    if any(v is None for v in values):
        return ""
    return _fmt(np.mean(values))


def _write_curve(path: Path, seeds: Sequence[int], summaries: Sequence[dict[str, Any]]) -> None:
    length = max(s["num_trials"] for s in summaries)
    energy = [_carry(s["best_energy_curve"], length) for s in summaries]
    objective = [_carry(s["best_objective_curve"], length) for s in summaries]
    header = ["trial"]
    header += [f"energy_seed{s}" for s in seeds] + ["mean_energy"]
    header += [f"objective_seed{s}" for s in seeds] + ["mean_objective"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(length):
            e = [series[k] for series in energy]
            o = [series[k] for series in objective]
            writer.writerow(
                [k + 1]
                + ["" if v is None else v for v in e] + [_mean_or_blank(e)]
                + ["" if v is None else _fmt(v) for v in o] + [_mean_or_blank(o)]
            )


def run_experiment(config: ExperimentConfig, solver: Solver = annealer_solver) -> dict[str, Any]:
    """Run one study per seed and write ``trials.csv``, ``curve.csv``, ``summary.json``.

    ``solver`` must be picklable when ``config.workers > 1``.
    """
    if not config.problem.exists():
        raise ConfigFileError(f"problem file {config.problem} does not exist")
    config.tuner_config()  # validate before doing any work
    name, bqp = load_problem(config.problem, config.kind)
    out = config.output
    out.mkdir(parents=True, exist_ok=True)

    jobs = [(config, bqp, seed, solver) for seed in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            summaries = list(pool.map(_run_seed, jobs))
    else:
        summaries = [_run_seed(job) for job in jobs]

    names = default_space().names
    with (out / "trials.csv").open("w", newline="") as fh:
        fh.write(",".join(_trial_header(names)) + "\n")
        for seed in config.seeds:
            lines = (out / f"seed-{seed}.csv").read_text().splitlines(keepends=True)
            fh.writelines(lines[1:])
    _write_curve(out / "curve.csv", config.seeds, summaries)

    trials_used = [s["num_trials"] for s in summaries]
    best = [s["best_e_p"] for s in summaries if s["best_e_p"] is not None]
    summary = {
        "method": config.label,
        "instance": name,
        "num_vars": bqp.num_vars,
        "budget": {"limit": config.budget, "mode": config.budget_mode},
        "config": config.to_json(),
        "mean_trials": float(np.mean(trials_used)),
        "mean_convergence_trial": float(np.mean(trials_used)) if config.fast_convergence else None,
        "mean_best_e_p": float(np.mean(best)) if best else None,
        "seeds": [{k: v for k, v in s.items() if not k.endswith("_curve")} for s in summaries],
        "default_baseline": _baseline(config, bqp, solver),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    log.info("%s on %s: mean best E_p %s over %d seeds", config.label, name,
             summary["mean_best_e_p"], len(config.seeds))
    return summary


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class _Report:
    label: str
    instance: str
    num_vars: int
    budget: dict[str, Any]
    trials_used: float
    curve: list[float | None]


def _load_report(path: str | Path) -> _Report:
    path = Path(path)
    summary = json.loads((path / "summary.json").read_text())
    with (path / "curve.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    curve = [float(r["mean_energy"]) if r["mean_energy"] else None for r in rows]
    return _Report(summary["method"], summary["instance"], summary["num_vars"],
                   summary["budget"], summary["mean_trials"], curve)


def _at(curve: list[float | None], trial: int) -> float | None:
    # curves are carried forward; a method that stopped early keeps its final value
    return curve[min(trial, len(curve)) - 1]


def compare_methods(paths: Sequence[str | Path]) -> list[dict[str, Any]]:
    """Pairwise GAP between experiment reports on the same instance.

    For each pair the comparison trial is the smaller of the two methods'
    (rounded) mean trial counts, i.e. the point where the faster method ended.
    ``gap`` is ``(E_b - E_a) / |E_a|`` of the mean best energies there.
    """
    reports = [_load_report(p) for p in paths]
    if len(reports) < 2:
        raise ComparisonError("need at least two reports")
    first = reports[0]
    for r in reports[1:]:
        if (r.instance, r.num_vars, r.budget) != (first.instance, first.num_vars, first.budget):
            raise ComparisonError(
                f"reports differ in instance or budget: {first.label} on {first.instance} "
                f"vs {r.label} on {r.instance}"
            )
    rows = []
    for a, b in itertools.combinations(reports, 2):
        trial = max(1, round(min(a.trials_used, b.trials_used)))
        e_a, e_b = _at(a.curve, trial), _at(b.curve, trial)
        gap = None if e_a is None or e_b is None or e_a == 0 else compute_gap(e_b, e_a)
        rows.append({
            "method_a": a.label, "method_b": b.label, "trial": trial,
            "mean_e_a": e_a, "mean_e_b": e_b, "gap_b_vs_a": gap,
            "trials_a": a.trials_used, "trials_b": b.trials_used,
        })
    return rows


def format_comparison(rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method_a", "method_b", "trial", "mean_e_a", "mean_e_b",
                     "gap_b_vs_a_percent", "trials_a", "trials_b"])
    for r in rows:
        gap = "" if r["gap_b_vs_a"] is None else f"{100 * r['gap_b_vs_a']:.4f}"
        writer.writerow([r["method_a"], r["method_b"], r["trial"], r["mean_e_a"], r["mean_e_b"],
                         gap, r["trials_a"], r["trials_b"]])
    return buf.getvalue()


def with_overrides(config: ExperimentConfig, **kwargs: Any) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})
