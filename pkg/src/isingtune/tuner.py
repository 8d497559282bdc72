"""Black-box tuning loops: plain (suggest, solve, score, record) and FastConvergence.

FastConvergence adds two things to the plain loop:

* after ``m`` warm-up trials every parameter's active range shrinks to
  ``1 / gamma`` of its width, centred on the value that produced the best
  energy so far and clipped to the hard limits;
* after warm-up, the study stops once ``l`` consecutive trials fail to lower
  the best energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Protocol

import numpy as np

from .annealer import SolveBudget, SolveReport, SolverParams, solve
from .qubo import Bqp
from .samplers import ParamSpace, ParamSpec, TpeState, default_space, suggest_random, suggest_tpe

__all__ = [
    "ConfigError",
    "GapUndefinedError",
    "Study",
    "Trial",
    "TunerConfig",
    "compute_gap",
    "compute_objective",
    "narrow_range",
    "run_study",
    "solver_seed",
]

INFEASIBLE = math.inf


class ConfigError(ValueError):
    pass


class GapUndefinedError(ZeroDivisionError):
    pass


class Solver(Protocol):
    def __call__(self, bqp: Bqp, params: Mapping[str, int], budget: SolveBudget,
                 seed: int) -> SolveReport: ...


def annealer_solver(bqp: Bqp, params: Mapping[str, int], budget: SolveBudget,
                    seed: int) -> SolveReport:
    return solve(bqp, SolverParams(**params), budget, seed)


def compute_objective(e_p: int | None, t_ep: float, t_coeff: float) -> float:
    """Score a trial as ``t_coeff * e_p + t_ep``.

    With ``t_coeff`` at least the run-time budget, the energy dominates and the
    discovery time only separates trials that tie on energy. An infeasible
    trial (``e_p is None``) scores ``inf``.
    """
    if e_p is None:
        return INFEASIBLE
    return t_coeff * e_p + t_ep


def compute_gap(e_p: int | float, e_min: int | float) -> float:
    """Relative gap ``(e_p - e_min) / |e_min|``."""
    if e_min == 0:
        raise GapUndefinedError("GAP is undefined when the reference energy is 0")
    return (e_p - e_min) / abs(e_min)


def _round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def narrow_range(spec: ParamSpec, x_b: int, gamma: float) -> ParamSpec:
    """Shrink ``spec``'s active range to ``width / gamma`` around ``x_b``.

    Each bound is rounded to the nearest integer (halves up) and then clipped
    to the hard limits. Both bounds move toward ``x_b`` by at most one half,
    so ``x_b`` always stays inside and the width exceeds ``width / gamma`` by
    at most one.
    """
    if not spec.allowed_min <= x_b <= spec.allowed_max:
        raise ValueError(f"{spec.name}: best value {x_b} outside allowed range")
    if not gamma > 1:
        raise ValueError("gamma must be > 1")
    half = Fraction(spec.width) / Fraction(gamma) / 2
    lo = max(spec.allowed_min, _round_half_up(x_b - half))
    hi = min(spec.allowed_max, _round_half_up(x_b + half))
    return spec.with_range(lo, hi)


@dataclass(frozen=True)
class TunerConfig:
    n: int = 1000
    m: int = 150
    l: int = 150  # noqa: E741
    gamma: float = 4.0
    t_coeff: float | None = None
    budget: SolveBudget = field(default_factory=lambda: SolveBudget(30.0))
    sampler: str = "tpe"
    fast_convergence: bool = False
    n_startup: int = 10
    n_candidates: int = 24

    def __post_init__(self) -> None:
        if self.sampler not in ("random", "tpe"):
            raise ConfigError(f"sampler must be 'random' or 'tpe', got {self.sampler!r}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.fast_convergence:
            if not 1 <= self.m < self.n:
                raise ConfigError(f"warm-up m={self.m} must satisfy 1 <= m < n={self.n}")
            if self.l < 1:
                raise ConfigError("l must be >= 1")
            if not self.gamma > 1:
                raise ConfigError("gamma must be > 1")

    @property
    def objective_coeff(self) -> float:
        return self.budget.limit if self.t_coeff is None else self.t_coeff


@dataclass(frozen=True)
class Trial:
    index: int
    params: dict[str, int]
    e_p: int | None
    t_ep: float
    objective: float
    solver_seed: int

    @property
    def feasible(self) -> bool:
        return self.e_p is not None


@dataclass
class Study:
    space: ParamSpace
    config: TunerConfig
    rng_seed: int
    trials: list[Trial] = field(default_factory=list)
    best_emin: int | None = None
    best_params: dict[str, int] | None = None
    best_trial: int | None = None
    narrowed_at: int | None = None
    termination: str = "running"

    @property
    def num_trials(self) -> int:
        return len(self.trials)

    def best_energy_curve(self) -> list[int | None]:
        """Best-so-far energy after each trial."""
        out: list[int | None] = []
        best = None
        for t in self.trials:
            if t.e_p is not None and (best is None or t.e_p < best):
                best = t.e_p
            out.append(best)
        return out

    def best_objective_curve(self) -> list[float]:
        return list(np.minimum.accumulate([t.objective for t in self.trials]))


def solver_seed(study_seed: int, index: int) -> int:
    """Seed for the solver run of trial ``index`` (independent of the sampler stream)."""
    return int(np.random.SeedSequence([study_seed, index]).generate_state(1, np.uint32)[0])


def run_study(
    bqp: Bqp,
    config: TunerConfig,
    seed: int,
    solver: Solver = annealer_solver,
    space: ParamSpace | None = None,
    on_trial: Callable[[Study, Trial], None] | None = None,
) -> Study:
    """Run one tuning study on ``bqp``.

    ``solver`` receives the suggested parameters as a name -> int mapping and
    must return a :class:`SolveReport`-like object (``best_energy``,
    ``time_found``, ``feasible_found``). ``on_trial`` is called after each
    recorded trial.
    """
    space = default_space() if space is None else space
    study = Study(space=space, config=config, rng_seed=seed)
    rng = np.random.default_rng(seed)
    tpe = TpeState(n_startup=config.n_startup, n_candidates=config.n_candidates)
    t_coeff = config.objective_coeff
    stall = 0

    for index in range(1, config.n + 1):
        if config.sampler == "tpe":
            params = suggest_tpe(study.space, tpe, rng)
        else:
            params = suggest_random(study.space, rng)
        s_seed = solver_seed(seed, index)
        report = solver(bqp, params, config.budget, s_seed)
        e_p = int(report.best_energy) if report.feasible_found else None
        t_ep = float(report.time_found) if report.feasible_found else 0.0
        trial = Trial(index, params, e_p, t_ep, compute_objective(e_p, t_ep, t_coeff), s_seed)
        study.trials.append(trial)
        tpe.observe(params, trial.objective)

        improved = e_p is not None and (study.best_emin is None or e_p < study.best_emin)
        if improved:
            study.best_emin = e_p
            study.best_params = dict(params)
            study.best_trial = index
        if on_trial is not None:
            on_trial(study, trial)

        if not config.fast_convergence:
            continue
        if index == config.m:
            if study.best_params is not None:
                for spec in study.space:
                    study.space = study.space.replace_spec(
                        narrow_range(spec, study.best_params[spec.name], config.gamma)
                    )
            study.narrowed_at = index
        elif index > config.m:
            stall = 0 if improved else stall + 1
            if stall >= config.l:
                study.termination = "converged"
                return study

    study.termination = "completed"
    return study
