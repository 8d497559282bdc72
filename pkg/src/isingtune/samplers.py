"""Hyperparameter suggestion: uniform random sampling and a univariate TPE.

The search space is a list of integer parameters, each with hard limits
(``allowed_*``) and a mutable active range (``current_*``). Samplers only ever
propose values inside the active range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "ParamSpace",
    "ParamSpec",
    "TpeState",
    "default_space",
    "suggest_random",
    "suggest_tpe",
]

Params = dict[str, int]


@dataclass(frozen=True)
class ParamSpec:
    name: str
    allowed_min: int
    allowed_max: int
    current_min: int | None = None
    current_max: int | None = None

    def __post_init__(self) -> None:
        if self.current_min is None:
            object.__setattr__(self, "current_min", self.allowed_min)
        if self.current_max is None:
            object.__setattr__(self, "current_max", self.allowed_max)
        if not (self.allowed_min <= self.current_min <= self.current_max <= self.allowed_max):
            raise ValueError(
                f"{self.name}: need allowed_min <= current_min <= current_max <= allowed_max, got "
                f"{self.allowed_min}, {self.current_min}, {self.current_max}, {self.allowed_max}"
            )

    @property
    def width(self) -> int:
        """Active range ``current_max - current_min``."""
        return self.current_max - self.current_min

    @property
    def size(self) -> int:
        return self.current_max - self.current_min + 1

    def with_range(self, lo: int, hi: int) -> ParamSpec:
        return replace(self, current_min=lo, current_max=hi)

    def contains(self, value: int) -> bool:
        return self.current_min <= value <= self.current_max


@dataclass(frozen=True)
class ParamSpace:
    specs: tuple[ParamSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")

    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    def __getitem__(self, name: str) -> ParamSpec:
        for spec in self.specs:
            if spec.name == name:
                return spec
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def num_combinations(self) -> int:
        return math.prod(s.size for s in self.specs)

    def replace_spec(self, spec: ParamSpec) -> ParamSpace:
        return ParamSpace(tuple(spec if s.name == spec.name else s for s in self.specs))

    def contains(self, params: Mapping[str, int]) -> bool:
        return all(s.contains(params[s.name]) for s in self.specs)


def default_space() -> ParamSpace:
    """The four DA search parameters over their full ranges."""
    return ParamSpace((
        ParamSpec("gs_level", 0, 100),
        ParamSpec("gs_cutoff", 0, 1_000_000),
        ParamSpec("num_run", 1, 16),
        ParamSpec("num_group", 1, 16),
    ))


def suggest_random(space: ParamSpace, rng: np.random.Generator) -> Params:
    return {s.name: int(rng.integers(s.current_min, s.current_max, endpoint=True)) for s in space}


# ---------------------------------------------------------------------------
# TPE


@dataclass
class TpeState:
    """Observation history and settings for :func:`suggest_tpe`.

    Infeasible trials are recorded with ``math.inf``; they always fall in the
    "rest" group.
    """

    observations: list[tuple[Params, float]] = field(default_factory=list)
    n_startup: int = 10
    n_candidates: int = 24
    good_fraction: float = 0.25
    max_good: int = 25

    def observe(self, params: Mapping[str, int], objective: float) -> None:
        self.observations.append((dict(params), float(objective)))

    def split(self) -> tuple[list[int], list[int]]:
        """Indices of the good and rest observations.

        Sorting is stable so equal objectives go to the earlier trial first.
        """
        objectives = np.array([o for _, o in self.observations], dtype=float)
        order = np.argsort(objectives, kind="stable")
        n_finite = int(np.isfinite(objectives).sum())
        n_good = min(math.ceil(self.good_fraction * len(objectives)), self.max_good, n_finite)
        return sorted(order[:n_good].tolist()), sorted(order[n_good:].tolist())


class _Parzen:
    """1-D mixture of discretised Gaussians plus a uniform prior over ``[lo, hi]``."""

    def __init__(self, values: Sequence[int], lo: int, hi: int):
        self.lo, self.hi = lo, hi
        self.mus = np.asarray(values, dtype=float)
        n = len(self.mus)
        self.sigma = max((hi - lo) / min(n, 25), 1.0) if n else 1.0
        # equal weights; the prior is the last component
        self.weight = 1.0 / (n + 1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.integers(0, len(self.mus) + 1, size=size)
        out = np.empty(size, dtype=np.int64)
        prior = comp == len(self.mus)
        out[prior] = rng.integers(self.lo, self.hi, endpoint=True, size=int(prior.sum()))
        k = ~prior
        draws = rng.normal(self.mus[comp[k]], self.sigma)
        out[k] = np.clip(np.rint(draws), self.lo, self.hi).astype(np.int64)
        return out

    def log_pmf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[:, None]
        mass = ndtr((x + 0.5 - self.mus) / self.sigma) - ndtr((x - 0.5 - self.mus) / self.sigma)
        total = mass.sum(axis=1) + 1.0 / (self.hi - self.lo + 1)
        return np.log(self.weight * total)


def suggest_tpe(space: ParamSpace, state: TpeState, rng: np.random.Generator) -> Params:
    """Propose the candidate maximising ``l(x) / g(x)`` independently per parameter.

    Falls back to :func:`suggest_random` until ``n_startup`` observations exist.
    """
    if len(state.observations) < state.n_startup:
        return suggest_random(space, rng)
    good, rest = state.split()
    out: Params = {}
    for spec in space:
        lo, hi = spec.current_min, spec.current_max
        if lo == hi:
            out[spec.name] = lo
            continue
        good_vals = [state.observations[i][0][spec.name] for i in good]
        rest_vals = [state.observations[i][0][spec.name] for i in rest]
        below = _Parzen(good_vals, lo, hi)
        above = _Parzen(rest_vals, lo, hi)
        candidates = below.sample(rng, state.n_candidates)
        score = below.log_pmf(candidates) - above.log_pmf(candidates)
        out[spec.name] = int(candidates[int(np.argmax(score))])
    return out
