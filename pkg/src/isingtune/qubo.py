"""Binary quadratic programs: objective QUBO, penalty QUBO and linear inequalities.

A :class:`Bqp` describes the problem

    minimize    x^T Q_obj x
    subject to  x^T Q_pen x + offset = 0
                W_i . x <= C_i   for every inequality i

over binary vectors ``x``. Both quadratic forms are stored as upper-triangular
sparse matrices with integer coefficients; any (i, j) pair handed to the
constructor is folded onto ``i <= j`` so the lower-triangular and
upper-triangular spellings of the same form are indistinguishable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Bqp",
    "DimensionError",
    "Inequality",
    "as_assignment",
    "energy",
    "is_feasible",
    "penalty_energy",
    "upper_triangular",
]


class DimensionError(ValueError):
    """Assignment length does not match the number of BQP variables."""


@dataclass(frozen=True)
class Inequality:
    weights: np.ndarray
    bound: int

    def holds(self, bits: np.ndarray) -> bool:
        return int(self.weights @ bits) <= self.bound


def upper_triangular(
    rows: Sequence[int] | np.ndarray,
    cols: Sequence[int] | np.ndarray,
    vals: Sequence[int] | np.ndarray,
    num_vars: int,
) -> sp.csr_matrix:
    """Build a canonical upper-triangular CSR matrix from COO triplets.

    Entries below the diagonal are mirrored above it and duplicates are summed.
    Explicit zeros are dropped.
    """
    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)
    v = np.asarray(vals, dtype=np.int64)
    if not (r.shape == c.shape == v.shape):
        raise ValueError("rows, cols and vals must have the same length")
    if r.size and (min(r.min(), c.min()) < 0 or max(r.max(), c.max()) >= num_vars):
        raise IndexError("coefficient index out of range")
    lo = np.minimum(r, c)
    hi = np.maximum(r, c)
    mat = sp.coo_matrix((v, (lo, hi)), shape=(num_vars, num_vars), dtype=np.int64).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def _as_upper(mat: sp.spmatrix | np.ndarray | None, num_vars: int) -> sp.csr_matrix:
    if mat is None:
        return sp.csr_matrix((num_vars, num_vars), dtype=np.int64)
    coo = sp.coo_matrix(mat)
    if coo.shape != (num_vars, num_vars):
        raise DimensionError(f"matrix shape {coo.shape} does not match {num_vars} variables")
    return upper_triangular(coo.row, coo.col, coo.data, num_vars)


@dataclass(frozen=True)
class Bqp:
    """One binary quadratic program instance.

    ``q_obj`` and ``q_pen`` accept any square matrix-like (dense or sparse);
    they are normalised to upper-triangular ``int64`` CSR on construction.
    """

    num_vars: int
    q_obj: sp.csr_matrix
    q_pen: sp.csr_matrix | None = None
    pen_offset: int = 0
    inequalities: tuple[Inequality, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.num_vars < 1:
            raise ValueError("a BQP needs at least one variable")
        object.__setattr__(self, "q_obj", _as_upper(self.q_obj, self.num_vars))
        object.__setattr__(self, "q_pen", _as_upper(self.q_pen, self.num_vars))
        object.__setattr__(self, "pen_offset", int(self.pen_offset))
        ineqs = []
        for item in self.inequalities:
            if not isinstance(item, Inequality):
                weights, bound = item
                item = Inequality(np.asarray(weights, dtype=np.int64), int(bound))
            if item.weights.shape != (self.num_vars,):
                raise DimensionError("inequality weights must have one entry per variable")
            ineqs.append(item)
        object.__setattr__(self, "inequalities", tuple(ineqs))

    @classmethod
    def from_triplets(
        cls,
        num_vars: int,
        obj: Iterable[tuple[int, int, int]],
        pen: Iterable[tuple[int, int, int]] = (),
        pen_offset: int = 0,
        inequalities: Iterable[tuple[Sequence[int], int]] = (),
    ) -> Bqp:
        def split(triplets):
            t = list(triplets)
            if not t:
                return upper_triangular([], [], [], num_vars)
            r, c, v = zip(*t)
            return upper_triangular(r, c, v, num_vars)

        return cls(num_vars, split(obj), split(pen), pen_offset, tuple(inequalities))

    @property
    def has_penalty(self) -> bool:
        return self.q_pen.nnz > 0 or self.pen_offset != 0


def as_assignment(bqp: Bqp, bits: Sequence[int] | np.ndarray) -> np.ndarray:
    x = np.asarray(bits, dtype=np.int64)
    if x.ndim != 1 or x.shape[0] != bqp.num_vars:
        raise DimensionError(f"expected {bqp.num_vars} bits, got shape {x.shape}")
    if np.any((x != 0) & (x != 1)):
        raise ValueError("assignment must be binary")
    return x


def _quadratic_form(mat: sp.csr_matrix, x: np.ndarray) -> int:
    # x is 0/1 so x^T U x is the sum of coefficients whose row and column are both set
    return int(x @ (mat @ x))


def energy(bqp: Bqp, bits: Sequence[int] | np.ndarray) -> int:
    """Objective energy ``x^T Q_obj x`` (no penalty, no constant)."""
    return _quadratic_form(bqp.q_obj, as_assignment(bqp, bits))


def penalty_energy(bqp: Bqp, bits: Sequence[int] | np.ndarray) -> int:
    """Penalty value ``x^T Q_pen x + offset``; zero means the equality holds."""
    return _quadratic_form(bqp.q_pen, as_assignment(bqp, bits)) + bqp.pen_offset


def is_feasible(bqp: Bqp, bits: Sequence[int] | np.ndarray) -> bool:
    x = as_assignment(bqp, bits)
    if _quadratic_form(bqp.q_pen, x) + bqp.pen_offset != 0:
        return False
    return all(ineq.holds(x) for ineq in bqp.inequalities)
