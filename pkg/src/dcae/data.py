"""Ratings ingestion, seeded splits and a synthetic ground-truth generator.

Accepted text formats (one rating per line, optional trailing timestamp):

* ``mlcolon``: ``user::item::rating[::timestamp]`` (MovieLens)
* ``csv``:     ``user,item,rating[,timestamp]``
* ``ws``:      whitespace separated

External user/item IDs are remapped to dense 0-based indices ordered by
ID (numerically when every ID is an integer). All randomness uses
numpy's ``default_rng`` (PCG64) seeded with the caller's integer.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np

__all__ = [
    "FORMATS",
    "ParseError",
    "SparseRatings",
    "SplitRatings",
    "parse_ratings",
    "read_ratings",
    "write_ratings",
    "split",
    "write_split",
    "synthesize",
]

FORMATS = {"mlcolon": "::", "csv": ",", "ws": None}
_EXT = {"mlcolon": ".dat", "csv": ".csv", "ws": ".txt"}


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SparseRatings:
    """Observed entries of a ratings matrix in COO form, sorted by (row, col)."""

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    row_ids: Tuple[str, ...]
    col_ids: Tuple[str, ...]

    def __post_init__(self):
        nnz = len(self.values)
        if len(self.rows) != nnz or len(self.cols) != nnz:
            raise ValueError("rows, cols and values must have equal length")
        if nnz:
            if self.rows.min() < 0 or self.rows.max() >= self.n_rows:
                raise ValueError("row index out of bounds")
            if self.cols.min() < 0 or self.cols.max() >= self.n_cols:
                raise ValueError("column index out of bounds")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("ratings must be finite")
            key = self.rows.astype(np.int64) * self.n_cols + self.cols
            if np.any(np.diff(key) <= 0):
                raise ValueError("entries must be sorted by (row, col) without duplicates")
        if len(self.row_ids) != self.n_rows or len(self.col_ids) != self.n_cols:
            raise ValueError("ID maps must cover every row and column")

    @property
    def nnz(self):
        return len(self.values)

    def to_dense(self, fill=0.0):
        A = np.full((self.n_rows, self.n_cols), fill, dtype=float)
        A[self.rows, self.cols] = self.values
        return A

    def subset(self, index):
        """Entries at the given positions, keeping the full row/col space."""
        index = np.sort(np.asarray(index, dtype=np.int64))
        return SparseRatings(
            self.n_rows,
            self.n_cols,
            self.rows[index],
            self.cols[index],
            self.values[index],
            self.row_ids,
            self.col_ids,
        )

    def same_as(self, other):
        return (
            self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and self.row_ids == other.row_ids
            and self.col_ids == other.col_ids
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class SplitRatings:
    train: SparseRatings
    test: SparseRatings
    seed: int
    train_fraction: float


def _id_order(ids):
    ids = list(ids)
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def _from_triplets(users, items, values):
    row_ids = tuple(_id_order(set(users)))
    col_ids = tuple(_id_order(set(items)))
    rpos = {u: i for i, u in enumerate(row_ids)}
    cpos = {v: j for j, v in enumerate(col_ids)}
    rows = np.fromiter((rpos[u] for u in users), dtype=np.int64, count=len(users))
    cols = np.fromiter((cpos[v] for v in items), dtype=np.int64, count=len(items))
    vals = np.asarray(values, dtype=float)
    order = np.lexsort((cols, rows))
    return SparseRatings(len(row_ids), len(col_ids), rows[order], cols[order], vals[order], row_ids, col_ids)


def parse_ratings(stream, format="mlcolon"):
    """Parse ``user<sep>item<sep>rating[<sep>timestamp]`` lines.

    ``stream`` is any iterable of lines or a string. Blank lines and lines
    starting with ``#`` are skipped. Raises :class:`ParseError` on
    malformed or duplicate lines (with the offending line number) and on
    input without ratings.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {sorted(FORMATS)}")
    sep = FORMATS[format]
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    users, items, values = [], [], []
    seen = {}
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(sep)] if sep else text.split()
        if len(parts) not in (3, 4) or not parts[0] or not parts[1]:
            raise ParseError(f"expected 3 or 4 fields, got {len(parts)}: {text!r}", lineno)
        try:
            value = float(parts[2])
        except ValueError:
            raise ParseError(f"rating {parts[2]!r} is not a number", lineno) from None
        if not math.isfinite(value):
            raise ParseError(f"rating {parts[2]!r} is not finite", lineno)
        key = (parts[0], parts[1])
        if key in seen:
            raise ParseError(
                f"duplicate rating for user {key[0]} item {key[1]} (first seen on line {seen[key]})",
                lineno,
            )
        seen[key] = lineno
        users.append(parts[0])
        items.append(parts[1])
        values.append(value)
    if not values:
        raise ParseError("no entries")
    return _from_triplets(users, items, values)


def read_ratings(path, format="mlcolon"):
    with open(path) as fh:
        return parse_ratings(fh, format)


def format_ratings(ratings, format="mlcolon"):
    sep = FORMATS[format] or " "
    lines = [
        f"{ratings.row_ids[i]}{sep}{ratings.col_ids[j]}{sep}{v!r}"
        for i, j, v in zip(ratings.rows.tolist(), ratings.cols.tolist(), ratings.values.tolist())
    ]
    return "\n".join(lines) + "\n"


def write_ratings(path, ratings, format="mlcolon"):
    with open(path, "w") as fh:
        fh.write(format_ratings(ratings, format))


def split(ratings, train_fraction=0.7, seed=0):
    """Random train/test partition with ``round(fraction * N)`` training entries."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = ratings.nnz
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(f"fraction {train_fraction} of {n} ratings leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitRatings(
        ratings.subset(perm[:n_train]), ratings.subset(perm[n_train:]), int(seed), float(train_fraction)
    )


def write_split(directory, parts, format="mlcolon", prefix="split"):
    """Write ``<prefix>_train``, ``<prefix>_test`` and a JSON sidecar.

    The sidecar records seed, fraction, counts and the dense-index ID maps.
    Returns the three paths.
    """
    os.makedirs(directory, exist_ok=True)
    ext = _EXT[format]
    train_path = os.path.join(directory, f"{prefix}_train{ext}")
    test_path = os.path.join(directory, f"{prefix}_test{ext}")
    meta_path = os.path.join(directory, f"{prefix}.json")
    write_ratings(train_path, parts.train, format)
    write_ratings(test_path, parts.test, format)
    meta = {
        "seed": parts.seed,
        "train_fraction": parts.train_fraction,
        "n_train": parts.train.nnz,
        "n_test": parts.test.nnz,
        "n_rows": parts.train.n_rows,
        "n_cols": parts.train.n_cols,
        "format": format,
        "row_ids": list(parts.train.row_ids),
        "col_ids": list(parts.train.col_ids),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return train_path, test_path, meta_path


def synthesize(m, n, t_true, density, noise_sd=0.0, seed=0):
    """Low-rank nonnegative ratings with ``round(density * m * n)`` observed.

    ``A = U* V* + noise`` clipped at zero, with ``U*``, ``V*`` uniform on
    [0, 1].
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if t_true < 1:
        raise ValueError("t_true must be >= 1")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    count = int(round(density * m * n))
    if count < 1:
        raise ValueError("density leaves no observed entries")
    rng = np.random.default_rng(seed)
    U = rng.uniform(0.0, 1.0, size=(m, t_true))
    V = rng.uniform(0.0, 1.0, size=(t_true, n))
    A = U @ V
    if noise_sd > 0:
        A = np.maximum(A + rng.normal(0.0, noise_sd, size=A.shape), 0.0)
    flat = np.sort(rng.choice(m * n, size=count, replace=False))
    rows, cols = np.divmod(flat, n)
    return SparseRatings(
        m,
        n,
        rows.astype(np.int64),
        cols.astype(np.int64),
        A[rows, cols].astype(float),
        tuple(str(i) for i in range(m)),
        tuple(str(j) for j in range(n)),
    )
