"""TSPLIB / QAPLIB readers and the permutation-matrix QUBO encoders.

Both problems use an N x N grid of one-hot variables. For TSP, variable
``i * N + t`` is set when city ``i`` is visited in time slot ``t``; for QAP,
variable ``i * N + k`` is set when facility ``i`` sits at location ``k``.
The penalty QUBO is the expanded sum of squared row and column deficits, with
its constant ``2N`` stored as the BQP offset so that permutation matrices
score exactly zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .qubo import Bqp, upper_triangular

__all__ = [
    "InvalidInstanceError",
    "ParseError",
    "QapInstance",
    "TspInstance",
    "UnsupportedFormatError",
    "encode_qap",
    "encode_tsp",
    "load_instance",
    "parse_qaplib",
    "parse_tsplib",
    "permutation_assignment",
    "qap_cost",
    "tour_length",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedFormatError(ParseError):
    pass


class InvalidInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class TspInstance:
    n: int
    dist: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        d = np.asarray(self.dist, dtype=np.int64)
        if d.shape != (self.n, self.n):
            raise InvalidInstanceError(f"distance matrix must be {self.n}x{self.n}")
        if np.any(np.diag(d) != 0):
            raise InvalidInstanceError("distance matrix must have a zero diagonal")
        if not np.array_equal(d, d.T):
            raise InvalidInstanceError("distance matrix must be symmetric")
        object.__setattr__(self, "dist", d)


@dataclass(frozen=True)
class QapInstance:
    n: int
    flow: np.ndarray
    dist: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        f = np.asarray(self.flow, dtype=np.int64)
        d = np.asarray(self.dist, dtype=np.int64)
        if f.shape != (self.n, self.n) or d.shape != (self.n, self.n):
            raise InvalidInstanceError(f"flow and distance matrices must be {self.n}x{self.n}")
        object.__setattr__(self, "flow", f)
        object.__setattr__(self, "dist", d)


# ---------------------------------------------------------------------------
# TSPLIB

_SUPPORTED_FORMATS = ("FULL_MATRIX", "LOWER_DIAG_ROW", "UPPER_ROW")


def _nint(x: float) -> int:
    return int(math.floor(x + 0.5))


def _euc_2d(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.floor(np.sqrt((diff**2).sum(axis=-1)) + 0.5).astype(np.int64)


def _geo(coords: np.ndarray) -> np.ndarray:
    # TSPLIB geographical distance: DDD.MM coordinates, idealised earth radius
    pi = 3.141592
    rrr = 6378.388
    deg = np.trunc(coords)
    minutes = coords - deg
    rad = pi * (deg + 5.0 * minutes / 3.0) / 180.0
    lat, lon = rad[:, 0], rad[:, 1]
    n = len(coords)
    d = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            q1 = math.cos(lon[i] - lon[j])
            q2 = math.cos(lat[i] - lat[j])
            q3 = math.cos(lat[i] + lat[j])
            dij = int(rrr * math.acos(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)) + 1.0)
            d[i, j] = d[j, i] = dij
    return d


def _explicit(values: list[int], n: int, fmt: str, line: int) -> np.ndarray:
    d = np.zeros((n, n), dtype=np.int64)
    if fmt == "FULL_MATRIX":
        expected = n * n
    elif fmt == "LOWER_DIAG_ROW":
        expected = n * (n + 1) // 2
    else:
        expected = n * (n - 1) // 2
    if len(values) != expected:
        raise ParseError(
            f"EDGE_WEIGHT_SECTION has {len(values)} values, {fmt} with n={n} needs {expected}",
            line,
        )
    if fmt == "FULL_MATRIX":
        d[:] = np.asarray(values, dtype=np.int64).reshape(n, n)
    elif fmt == "LOWER_DIAG_ROW":
        rows, cols = np.tril_indices(n)
        d[rows, cols] = values
        d[cols, rows] = values
    else:
        rows, cols = np.triu_indices(n, k=1)
        d[rows, cols] = values
        d[cols, rows] = values
    return d


def parse_tsplib(text: str | TextIO) -> TspInstance:
    """Read a symmetric TSP in TSPLIB format.

    Supported edge weights: ``EUC_2D``, ``GEO`` and ``EXPLICIT`` with
    ``FULL_MATRIX``, ``LOWER_DIAG_ROW`` or ``UPPER_ROW``.
    """
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    header: dict[str, str] = {}
    coords: list[tuple[float, float]] = []
    weights: list[int] = []
    section = None
    section_line = 0

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        keyword = re.match(r"^([A-Z_]+)\s*(?::\s*(.*))?$", line)
        if keyword and (keyword.group(2) is not None or keyword.group(1).endswith("SECTION")):
            key, value = keyword.group(1), keyword.group(2)
            if key.endswith("SECTION"):
                if key not in ("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION", "DISPLAY_DATA_SECTION"):
                    raise UnsupportedFormatError(f"unsupported section {key}", lineno)
                section, section_line = key, lineno
            else:
                header[key] = value.strip()
                section = None
            continue
        if section == "NODE_COORD_SECTION":
            parts = line.split()
            if len(parts) < 3:
                raise ParseError(f"malformed node line {line!r}", lineno)
            try:
                coords.append((float(parts[1]), float(parts[2])))
            except ValueError:
                raise ParseError(f"malformed node line {line!r}", lineno) from None
        elif section == "EDGE_WEIGHT_SECTION":
            try:
                weights.extend(int(float(tok)) for tok in line.split())
            except ValueError:
                raise ParseError(f"non-numeric edge weight in {line!r}", lineno) from None
        elif section == "DISPLAY_DATA_SECTION":
            continue
        else:
            raise ParseError(f"unexpected content {line!r}", lineno)

    if header.get("TYPE", "TSP").split()[0] not in ("TSP",):
        raise UnsupportedFormatError(f"unsupported problem TYPE {header['TYPE']}")
    try:
        n = int(header["DIMENSION"])
    except (KeyError, ValueError):
        raise ParseError("missing or invalid DIMENSION") from None
    ew_type = header.get("EDGE_WEIGHT_TYPE")
    name = header.get("NAME", "")

    if ew_type in ("EUC_2D", "GEO"):
        if len(coords) != n:
            raise ParseError(
                f"NODE_COORD_SECTION has {len(coords)} nodes, DIMENSION is {n}", section_line
            )
        arr = np.asarray(coords, dtype=float)
        dist = _euc_2d(arr) if ew_type == "EUC_2D" else _geo(arr)
    elif ew_type == "EXPLICIT":
        fmt = header.get("EDGE_WEIGHT_FORMAT")
        if fmt not in _SUPPORTED_FORMATS:
            raise UnsupportedFormatError(f"unsupported EDGE_WEIGHT_FORMAT {fmt}")
        dist = _explicit(weights, n, fmt, section_line)
    else:
        raise UnsupportedFormatError(f"unsupported EDGE_WEIGHT_TYPE {ew_type}")
    return TspInstance(n, dist, name)


# ---------------------------------------------------------------------------
# QAPLIB


def parse_qaplib(text: str | TextIO) -> QapInstance:
    """Read a QAPLIB ``.dat`` file: ``n`` followed by the flow and distance matrices."""
    if not isinstance(text, str):
        text = text.read()
    tokens: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for tok in line.split():
            try:
                tokens.append(int(tok))
            except ValueError:
                raise ParseError(f"non-integer token {tok!r}", lineno) from None
    if not tokens:
        raise ParseError("empty QAPLIB file")
    n = tokens[0]
    if n < 1:
        raise ParseError(f"invalid size {n}", 1)
    if len(tokens) != 1 + 2 * n * n:
        raise ParseError(f"expected {1 + 2 * n * n} integers for n={n}, found {len(tokens)}")
    body = np.asarray(tokens[1:], dtype=np.int64)
    return QapInstance(n, body[: n * n].reshape(n, n), body[n * n :].reshape(n, n))


def load_instance(path: str | Path, kind: str | None = None) -> TspInstance | QapInstance:
    """Parse a benchmark file; ``kind`` is ``"tsp"`` or ``"qap"`` (inferred from suffix)."""
    path = Path(path)
    if kind is None:
        kind = "tsp" if path.suffix.lower() == ".tsp" else "qap"
    text = path.read_text()
    if kind == "tsp":
        inst = parse_tsplib(text)
    elif kind == "qap":
        inst = parse_qaplib(text)
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    if not inst.name:
        object.__setattr__(inst, "name", path.stem)
    return inst


# ---------------------------------------------------------------------------
# encoders


def _one_hot_penalty(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Triplets of sum_rows (1 - sum x)^2 + sum_cols (1 - sum x)^2 without the constant.

    Each square expands to 1 - sum_a x_a + 2 sum_{a<b} x_a x_b (using x^2 = x),
    so every variable picks up -1 twice on the diagonal, and every pair sharing
    a row or a column gets +2.
    """
    idx = np.arange(n * n, dtype=np.int64).reshape(n, n)
    diag = np.arange(n * n, dtype=np.int64)
    rows = [diag]
    cols = [diag]
    vals = [np.full(n * n, -2, dtype=np.int64)]
    a, b = np.triu_indices(n, k=1)
    for grid in (idx, idx.T):
        # pairs within each row of the grid
        rows.append(grid[:, a].ravel())
        cols.append(grid[:, b].ravel())
        vals.append(np.full(n * len(a), 2, dtype=np.int64))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def encode_tsp(inst: TspInstance) -> Bqp:
    n = inst.n
    if n < 3:
        raise InvalidInstanceError("TSP encoding needs at least 3 cities")
    d = inst.dist
    # x_{i,t} x_{j,t+1} D[i,j] for every slot t (cyclic) and every ordered city pair i != j
    i, j = np.nonzero(d)
    t = np.arange(n, dtype=np.int64)
    rows = (i[:, None] * n + t[None, :]).ravel()
    cols = (j[:, None] * n + ((t + 1) % n)[None, :]).ravel()
    vals = np.repeat(d[i, j], n)
    q_obj = upper_triangular(rows, cols, vals, n * n)
    q_pen = upper_triangular(*_one_hot_penalty(n), n * n)
    return Bqp(n * n, q_obj, q_pen, pen_offset=2 * n)


def encode_qap(inst: QapInstance) -> Bqp:
    """Encode QAP as a BQP.

    The coefficient of ``x_{i,k} x_{j,l}`` collects ``F[i,j] D[k,l]`` from every
    ordered pair in the quadruple sum; pairs with ``(i,k) == (j,l)`` land on
    the diagonal. Memory grows as N^4 for dense instances.
    """
    n = inst.n
    if n < 2:
        raise InvalidInstanceError("QAP encoding needs n >= 2")
    f, d = inst.flow, inst.dist
    if f.shape != d.shape:
        raise InvalidInstanceError("flow and distance matrices differ in shape")
    fi, fj = np.nonzero(f)
    dk, dl = np.nonzero(d)
    rows = (fi[:, None] * n + dk[None, :]).ravel()
    cols = (fj[:, None] * n + dl[None, :]).ravel()
    vals = (f[fi, fj][:, None] * d[dk, dl][None, :]).ravel()
    q_obj = upper_triangular(rows, cols, vals, n * n)
    q_pen = upper_triangular(*_one_hot_penalty(n), n * n)
    return Bqp(n * n, q_obj, q_pen, pen_offset=2 * n)


# ---------------------------------------------------------------------------
# helpers for oracles and decoding


def permutation_assignment(perm: Iterable[int]) -> np.ndarray:
    """Bits with ``x[i * n + perm[i]] = 1``.

    For TSP read ``perm[i]`` as the slot of city ``i``; for QAP as the location
    of facility ``i``.
    """
    perm = np.asarray(list(perm), dtype=np.int64)
    n = len(perm)
    x = np.zeros(n * n, dtype=np.int64)
    x[np.arange(n) * n + perm] = 1
    return x


def tour_length(dist: np.ndarray, tour: Iterable[int]) -> int:
    tour = list(tour)
    return int(sum(dist[tour[k], tour[(k + 1) % len(tour)]] for k in range(len(tour))))


def qap_cost(flow: np.ndarray, dist: np.ndarray, perm: Iterable[int]) -> int:
    perm = np.asarray(list(perm), dtype=np.int64)
    return int((flow * dist[np.ix_(perm, perm)]).sum())
