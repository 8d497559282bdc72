"""Restart-based simulated annealer used as a stand-in for the Digital Annealer.

The solver runs ``num_run * num_group`` independent annealing attempts that
share one budget. Attempts are scheduled round-robin, one sweep each per turn,
so the trajectory for a budget ``B`` is a prefix of the trajectory for any
larger budget with the same seed.

The four tunable knobs mirror the DA search parameters:

``num_run``, ``num_group``
    Their product is the number of attempts sharing the budget.
``gs_level``
    Sweeps per temperature step, minus one. Higher levels cool more slowly.
``gs_cutoff``
    An attempt whose own best combined energy has not improved for this many
    consecutive flip proposals restarts from a fresh random state (checked at
    the end of each of its sweeps). ``0`` disables restarts.

Once an attempt reaches the end of its temperature schedule it keeps sweeping
at the coldest temperature until it is restarted or the budget runs out.

Time is measured in *logical units*: one unit is one sweep (``num_vars`` flip
proposals) by one attempt. In wall-clock mode the same kernel runs in chunks
and times are reported in seconds instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np
import scipy.sparse as sp

from .qubo import Bqp, is_feasible

__all__ = [
    "BudgetError",
    "BudgetMode",
    "DEFAULT_PARAMS",
    "PARAM_LIMITS",
    "ParameterRangeError",
    "SolveBudget",
    "SolveReport",
    "SolverParams",
    "TEMPERATURE_STEPS",
    "UnsupportedConstraintError",
    "penalty_weight",
    "solve",
]

TEMPERATURE_STEPS = 10

PARAM_LIMITS: dict[str, tuple[int, int]] = {
    "gs_level": (0, 100),
    "gs_cutoff": (0, 1_000_000),
    "num_run": (1, 16),
    "num_group": (1, 16),
}


class ParameterRangeError(ValueError):
    pass


class BudgetError(ValueError):
    pass


class UnsupportedConstraintError(ValueError):
    """The annealer handles the penalty QUBO only, not linear inequalities."""


@dataclass(frozen=True)
class SolverParams:
    num_run: int = 16
    num_group: int = 1
    gs_level: int = 5
    gs_cutoff: int = 8000

    def __post_init__(self) -> None:
        for name, (lo, hi) in PARAM_LIMITS.items():
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ParameterRangeError(f"{name} must be an integer, got {value!r}")
            if not lo <= value <= hi:
                raise ParameterRangeError(f"{name}={value} outside [{lo}, {hi}]")
            object.__setattr__(self, name, int(value))

    @property
    def num_attempts(self) -> int:
        return self.num_run * self.num_group

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in PARAM_LIMITS}


DEFAULT_PARAMS = SolverParams()


class BudgetMode(str, Enum):
    LOGICAL = "logical"
    WALL_CLOCK = "wall-clock"


@dataclass(frozen=True)
class SolveBudget:
    limit: float
    mode: BudgetMode = BudgetMode.LOGICAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BudgetMode(self.mode))
        if not self.limit > 0:
            raise BudgetError(f"budget limit must be positive, got {self.limit}")


@dataclass(frozen=True)
class SolveReport:
    best_energy: int | None
    time_found: float
    best_assignment: np.ndarray | None
    feasible_found: bool
    budget_used: float
    num_attempts: int
    restarts: int


def penalty_weight(bqp: Bqp) -> int:
    """``1 + max_i sum_j |Q_obj[i, j]|`` over the symmetric objective matrix.

    Any single flip changes the objective by at most the row sum, so one unit
    of penalty always outweighs it.
    """
    upper = abs(bqp.q_obj)
    full = upper + upper.T - sp.diags(upper.diagonal())
    rowsum = np.asarray(full.sum(axis=1)).ravel()
    return 1 + int(rowsum.max(initial=0))


@dataclass(frozen=True)
class _Compiled:
    indptr: np.ndarray
    indices: np.ndarray
    obj_vals: np.ndarray
    pen_vals: np.ndarray
    obj_diag: np.ndarray
    pen_diag: np.ndarray
    pen_offset: int
    weight: int


def _compile(bqp: Bqp) -> _Compiled:
    """Symmetric off-diagonal adjacency shared by the objective and penalty forms."""
    m = bqp.num_vars

    def keyed(upper: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
        off = sp.triu(upper, k=1).tocoo()
        rows = np.concatenate([off.row, off.col]).astype(np.int64)
        cols = np.concatenate([off.col, off.row]).astype(np.int64)
        return rows * m + cols, np.concatenate([off.data, off.data]).astype(np.int64)

    k_obj, v_obj = keyed(bqp.q_obj)
    k_pen, v_pen = keyed(bqp.q_pen)
    keys = np.union1d(k_obj, k_pen)
    obj_vals = np.zeros(keys.size, dtype=np.int64)
    pen_vals = np.zeros(keys.size, dtype=np.int64)
    obj_vals[np.searchsorted(keys, k_obj)] = v_obj
    pen_vals[np.searchsorted(keys, k_pen)] = v_pen
    rows = keys // m
    return _Compiled(
        indptr=np.searchsorted(rows, np.arange(m + 1)).astype(np.int64),
        indices=(keys % m).astype(np.int64),
        obj_vals=obj_vals,
        pen_vals=pen_vals,
        obj_diag=bqp.q_obj.diagonal().astype(np.int64),
        pen_diag=bqp.q_pen.diagonal().astype(np.int64),
        pen_offset=bqp.pen_offset,
        weight=penalty_weight(bqp),
    )


def _temperatures(weight: int) -> np.ndarray:
    t_hot, t_cold = float(weight), 1.0
    if t_hot <= t_cold:
        return np.full(TEMPERATURE_STEPS, t_cold)
    return np.geomspace(t_hot, t_cold, TEMPERATURE_STEPS)


class _State:
    """Mutable kernel state for all attempts, kept between chunks."""

    def __init__(self, m: int, num_attempts: int):
        a = num_attempts
        self.x = np.zeros((a, m), dtype=np.int8)
        self.h_obj = np.zeros((a, m), dtype=np.int64)
        self.h_pen = np.zeros((a, m), dtype=np.int64)
        self.e_obj = np.zeros(a, dtype=np.int64)
        self.e_pen = np.zeros(a, dtype=np.int64)
        self.own_best = np.zeros(a, dtype=np.int64)
        self.stall = np.zeros(a, dtype=np.int64)
        self.sweeps = np.zeros(a, dtype=np.int64)
        self.started = np.zeros(a, dtype=np.bool_)
        # [proposals done, next attempt, sweep position, found flag, restarts]
        self.counters = np.zeros(5, dtype=np.int64)
        self.best_x = np.zeros(m, dtype=np.int8)
        self.best = np.zeros(2, dtype=np.int64)  # [best feasible energy, proposal index found]


@numba.njit(cache=True)
def _reset_attempt(a, x, h_obj, h_pen, e_obj, e_pen, indptr, indices, obj_vals, pen_vals,
                   obj_diag, pen_diag, rng):
    m = x.shape[1]
    for i in range(m):
        x[a, i] = 1 if rng.random() < 0.5 else 0
        h_obj[a, i] = 0
        h_pen[a, i] = 0
    eo = 0
    ep = 0
    for i in range(m):
        if x[a, i] == 1:
            eo += obj_diag[i]
            ep += pen_diag[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                h_obj[a, j] += obj_vals[k]
                h_pen[a, j] += pen_vals[k]
    # each off-diagonal pair of set bits appears twice in the symmetric fields
    so = 0
    sq = 0
    for i in range(m):
        if x[a, i] == 1:
            so += h_obj[a, i]
            sq += h_pen[a, i]
    e_obj[a] = eo + so // 2
    e_pen[a] = ep + sq // 2


@numba.njit(cache=True)
def _run(limit, num_attempts, gs_level, gs_cutoff, temps, weight, pen_offset,
         indptr, indices, obj_vals, pen_vals, obj_diag, pen_diag,
         x, h_obj, h_pen, e_obj, e_pen, own_best, stall, sweeps, started,
         counters, best_x, best, rng):
    """Advance the round-robin schedule until ``limit`` total proposals are done."""
    m = x.shape[1]
    n_steps = temps.shape[0]
    per_step = 1 + gs_level
    done = counters[0]
    a = counters[1]
    pos = counters[2]
    while done < limit:
        if pos == 0 and not started[a]:
            _reset_attempt(a, x, h_obj, h_pen, e_obj, e_pen, indptr, indices, obj_vals,
                           pen_vals, obj_diag, pen_diag, rng)
            own_best[a] = e_obj[a] + weight * (e_pen[a] + pen_offset)
            stall[a] = 0
            sweeps[a] = 0
            started[a] = True
            if e_pen[a] + pen_offset == 0:
                if counters[3] == 0 or e_obj[a] < best[0]:
                    counters[3] = 1
                    best[0] = e_obj[a]
                    best[1] = done
                    for k in range(m):
                        best_x[k] = x[a, k]
        step = sweeps[a] // per_step
        if step >= n_steps:
            step = n_steps - 1
        temp = temps[step]
        while pos < m and done < limit:
            i = pos
            if x[a, i] == 1:
                sign = -1
            else:
                sign = 1
            d_obj = sign * (obj_diag[i] + h_obj[a, i])
            d_pen = sign * (pen_diag[i] + h_pen[a, i])
            delta = d_obj + weight * d_pen
            accept = delta <= 0
            if not accept:
                accept = rng.random() < np.exp(-delta / temp)
            done += 1
            pos += 1
            if accept:
                x[a, i] = 1 - x[a, i]
                for k in range(indptr[i], indptr[i + 1]):
                    j = indices[k]
                    h_obj[a, j] += sign * obj_vals[k]
                    h_pen[a, j] += sign * pen_vals[k]
                e_obj[a] += d_obj
                e_pen[a] += d_pen
                if e_pen[a] + pen_offset == 0:
                    if counters[3] == 0 or e_obj[a] < best[0]:
                        counters[3] = 1
                        best[0] = e_obj[a]
                        best[1] = done
                        for k in range(m):
                            best_x[k] = x[a, k]
            comb = e_obj[a] + weight * (e_pen[a] + pen_offset)
            if comb < own_best[a]:
                own_best[a] = comb
                stall[a] = 0
            else:
                stall[a] += 1
        if pos == m:
            pos = 0
            sweeps[a] += 1
            if gs_cutoff > 0 and stall[a] >= gs_cutoff:
                started[a] = False
                counters[4] += 1
            a += 1
            if a == num_attempts:
                a = 0
    counters[0] = done
    counters[1] = a
    counters[2] = pos


def _validate(bqp: Bqp, params: SolverParams, budget: SolveBudget) -> None:
    if not isinstance(params, SolverParams):
        raise ParameterRangeError("params must be a SolverParams instance")
    if not isinstance(budget, SolveBudget):
        raise BudgetError("budget must be a SolveBudget instance")
    if bqp.inequalities:
        raise UnsupportedConstraintError("linear inequality constraints are not supported by the annealer")


def solve(bqp: Bqp, params: SolverParams, budget: SolveBudget, seed: int) -> SolveReport:
    """Anneal ``bqp`` under ``params`` until the budget is spent.

    Returns the lowest objective energy among penalty-free assignments seen
    and the time it was first reached. Logical mode is bit-reproducible for a
    given seed.
    """
    _validate(bqp, params, budget)
    comp = _compile(bqp)
    temps = _temperatures(comp.weight)
    m = bqp.num_vars
    state = _State(m, params.num_attempts)
    rng = np.random.default_rng(seed)

    def advance(limit: int) -> None:
        _run(limit, params.num_attempts, params.gs_level, params.gs_cutoff, temps,
             comp.weight, comp.pen_offset, comp.indptr, comp.indices, comp.obj_vals,
             comp.pen_vals, comp.obj_diag, comp.pen_diag, state.x, state.h_obj, state.h_pen,
             state.e_obj, state.e_pen, state.own_best, state.stall, state.sweeps,
             state.started, state.counters, state.best_x, state.best, rng)

    if budget.mode is BudgetMode.LOGICAL:
        total = max(1, int(round(budget.limit * m)))
        advance(total)
        found_at = state.best[1] / m
        used = state.counters[0] / m
    else:
        # chunks of one sweep per attempt; times are wall seconds at chunk end
        chunk = m * params.num_attempts
        start = time.perf_counter()
        found_at = 0.0
        last_found = -1
        elapsed = 0.0
        while elapsed < budget.limit:
            advance(int(state.counters[0]) + chunk)
            elapsed = time.perf_counter() - start
            if state.counters[3] and state.best[1] != last_found:
                last_found = int(state.best[1])
                found_at = elapsed
        used = elapsed

    feasible = bool(state.counters[3])
    best_x = state.best_x.astype(np.int64) if feasible else None
    if feasible:
        assert is_feasible(bqp, best_x)
    return SolveReport(
        best_energy=int(state.best[0]) if feasible else None,
        time_found=float(found_at) if feasible else 0.0,
        best_assignment=best_x,
        feasible_found=feasible,
        budget_used=float(used),
        num_attempts=params.num_attempts,
        restarts=int(state.counters[4]),
    )
