from __future__ import annotations

import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingtune.annealer import SolveBudget, SolveReport
from isingtune.problems import encode_tsp
from isingtune.samplers import ParamSpec
from isingtune.tuner import (
    ConfigError,
    GapUndefinedError,
    TunerConfig,
    compute_gap,
    compute_objective,
    narrow_range,
    run_study,
)

from conftest import ConstantSolver, ImprovingSolver, random_tsp

STUB_BQP = encode_tsp(random_tsp(3, np.random.default_rng(0)))


def fc_config(n=50, m=5, l=4, **kw) -> TunerConfig:  # noqa: E741
    return TunerConfig(n=n, m=m, l=l, fast_convergence=True, budget=SolveBudget(10), **kw)


# -- objective ---------------------------------------------------------------

def test_objective_formula():
    assert compute_objective(1000, 12.5, 30) == 30012.5
    assert compute_objective(0, 0.0, 30) == 0


def test_objective_prefers_faster_discovery():
    assert compute_objective(500, 5, 30) < compute_objective(500, 9, 30)


def test_infeasible_objective_is_worst():
    assert compute_objective(None, 0, 30) == math.inf
    assert compute_objective(10**12, 30, 30) < compute_objective(None, 0, 30)


# -- gap ----------------------------------------------------------------------

@pytest.mark.parametrize("e_p, e_min, expected", [(110, 100, 0.1), (100, 100, 0.0), (50, -100, 1.5)])
def test_gap(e_p, e_min, expected):
    assert compute_gap(e_p, e_min) == pytest.approx(expected)


def test_gap_undefined_at_zero():
    with pytest.raises(GapUndefinedError):
        compute_gap(5, 0)


# -- range narrowing ------------------------------------------------------------

@pytest.mark.parametrize("lo, hi, x_b, expected", [
    (0, 100, 50, (38, 63)),
    (0, 100, 5, (0, 18)),
    (7, 7, 7, (7, 7)),
    (0, 100, 100, (88, 100)),
    (1, 16, 16, (14, 16)),
])
def test_narrow_examples(lo, hi, x_b, expected):
    spec = ParamSpec("p", lo, hi)
    out = narrow_range(spec, x_b, 4)
    assert (out.current_min, out.current_max) == expected
    assert (out.allowed_min, out.allowed_max) == (lo, hi)


def test_narrow_uses_current_width_not_allowed():
    spec = ParamSpec("p", 0, 1000, 200, 600)
    out = narrow_range(spec, 400, 4)
    assert (out.current_min, out.current_max) == (350, 450)


def test_narrow_rejects_bad_input():
    with pytest.raises(ValueError):
        narrow_range(ParamSpec("p", 0, 10), 11, 4)
    with pytest.raises(ValueError):
        narrow_range(ParamSpec("p", 0, 10), 5, 1)


@settings(max_examples=300, deadline=None)
@given(
    st.integers(-1000, 1000), st.integers(0, 2000), st.integers(0, 2000), st.integers(0, 2000),
    st.floats(min_value=1.01, max_value=50),
)
def test_narrow_properties(amin, span, a, b, gamma):
    amax = amin + span
    cmin, cmax = sorted((amin + a % (span + 1), amin + b % (span + 1)))
    spec = ParamSpec("p", amin, amax, cmin, cmax)
    x_b = cmin + (a * 7 + b) % (cmax - cmin + 1)
    out = narrow_range(spec, x_b, gamma)
    assert amin <= out.current_min <= x_b <= out.current_max <= amax
    assert out.width <= math.ceil(spec.width / gamma) + 1


# -- config ----------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        TunerConfig(n=10, m=10, fast_convergence=True)
    with pytest.raises(ConfigError):
        TunerConfig(n=10, m=3, l=0, fast_convergence=True)
    with pytest.raises(ConfigError):
        TunerConfig(n=10, m=3, gamma=1.0, fast_convergence=True)
    with pytest.raises(ConfigError):
        TunerConfig(sampler="grid")
    # m >= n is fine without fast convergence
    TunerConfig(n=10, m=10)


def test_t_coeff_defaults_to_budget():
    assert TunerConfig(budget=SolveBudget(30)).objective_coeff == 30
    assert TunerConfig(budget=SolveBudget(30), t_coeff=7).objective_coeff == 7


# -- study loop -----------------------------------------------------------------------

@pytest.mark.parametrize("sampler", ["random", "tpe"])
def test_plain_loop_runs_exactly_n(sampler):
    solver = ConstantSolver()
    study = run_study(STUB_BQP, TunerConfig(n=17, sampler=sampler, budget=SolveBudget(10)), 0, solver)
    assert study.num_trials == 17 == solver.calls
    assert study.termination == "completed"
    assert study.narrowed_at is None


@pytest.mark.parametrize("m, l", [(5, 4), (3, 3), (10, 1), (1, 7)])
def test_constant_solver_stops_at_m_plus_l(m, l):  # noqa: E741
    study = run_study(STUB_BQP, fc_config(m=m, l=l), 1, ConstantSolver())
    assert study.num_trials == m + l
    assert study.termination == "converged"
    assert study.narrowed_at == m


def test_improving_solver_runs_all_trials():
    study = run_study(STUB_BQP, fc_config(n=40, m=5, l=2), 2, ImprovingSolver())
    assert study.num_trials == 40
    assert study.termination == "completed"


def test_convergence_never_fires_during_warm_up():
    # m > l: the counter only starts after warm-up
    study = run_study(STUB_BQP, fc_config(n=60, m=20, l=3), 3, ConstantSolver())
    assert study.num_trials == 23


def test_range_narrowed_once_around_best():
    calls = []

    def solver(bqp, params, budget, seed):
        calls.append(dict(params))
        # the best energy is reached on trial 2 and never again
        e = 1 if len(calls) == 2 else 10 + len(calls)
        return SolveReport(e, 0.0, None, True, budget.limit, 1, 0)

    study = run_study(STUB_BQP, fc_config(n=30, m=6, l=50), 4, solver)
    x_b = calls[1]
    assert study.best_params == x_b
    for spec in study.space:
        assert spec.contains(x_b[spec.name])
        assert spec.width <= math.ceil((spec.allowed_max - spec.allowed_min) / 4) + 1
    for p in calls[6:]:
        assert study.space.contains(p)


def test_infeasible_trials_do_not_update_best():
    results = iter([None, 50, None, 40, None])

    def solver(bqp, params, budget, seed):
        e = next(results)
        return SolveReport(e, 1.0 if e else 0.0, None, e is not None, budget.limit, 1, 0)

    study = run_study(STUB_BQP, TunerConfig(n=5, budget=SolveBudget(10)), 0, solver)
    assert [t.objective for t in study.trials][0] == math.inf
    assert study.best_emin == 40
    assert study.best_trial == 4
    assert study.best_energy_curve() == [None, 50, 50, 40, 40]


def test_on_trial_callback_sees_every_trial():
    seen = []
    run_study(STUB_BQP, TunerConfig(n=6, budget=SolveBudget(10)), 0, ConstantSolver(),
              on_trial=lambda s, t: seen.append(t.index))
    assert seen == [1, 2, 3, 4, 5, 6]


def test_real_solver_study_invariants():
    bqp = encode_tsp(random_tsp(6, np.random.default_rng(5)))
    config = TunerConfig(n=25, m=8, l=6, fast_convergence=True, budget=SolveBudget(20))
    study = run_study(bqp, config, seed=9)
    curve = study.best_energy_curve()
    assert all(b <= a for a, b in zip(curve, curve[1:]) if a is not None)
    assert study.best_emin == min(t.e_p for t in study.trials if t.feasible)
    assert config.m + 1 <= study.num_trials <= config.n
    feasible = [t for t in study.trials if t.feasible]
    for a, b in combinations(feasible, 2):
        if a.e_p != b.e_p:
            lo, hi = sorted((a, b), key=lambda t: t.e_p)
            assert lo.objective < hi.objective
    for t in feasible:
        assert 0 <= t.t_ep <= config.budget.limit
        assert t.objective == config.budget.limit * t.e_p + t.t_ep


def test_study_is_reproducible():
    bqp = encode_tsp(random_tsp(5, np.random.default_rng(6)))
    config = TunerConfig(n=15, budget=SolveBudget(10))
    a = run_study(bqp, config, seed=3)
    b = run_study(bqp, config, seed=3)
    assert a.trials == b.trials
