"""Binary time-series datasets: CSV ingestion, lag construction and splitting.

CSV layout: a header row with mandatory ``t`` and ``y`` columns. Columns
prefixed ``x1_`` are fixed-effect covariates and ``x2_`` are GP inputs; when
there are no ``x2_`` columns the time index is the GP input. A covariate whose
name (after the prefix) starts with ``log_`` is stored as read and enters the
model on the log scale, e.g. ``x1_log_hr``.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, LoadError

LAG_NAME = "lag_y"


def _log_mask(names) -> np.ndarray:
    return np.array([n.startswith("log_") for n in names], dtype=bool)


def transform_columns(names, values) -> np.ndarray:
    """Apply the ``log_`` column convention to raw values (rows x columns)."""
    values = np.array(values, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    mask = _log_mask(names)
    if mask.any():
        if np.any(values[:, mask] <= 0):
            raise InvalidInputError("log-flagged column has non-positive values")
        values[:, mask] = np.log(values[:, mask])
    return values


@dataclass(eq=False)
class BinarySeriesDataset:
    t: np.ndarray
    y: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    x1_names: tuple = ()
    x2_names: tuple = ("t",)
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        n = self.t.shape[0]
        self.x1_names = tuple(self.x1_names)
        self.x2_names = tuple(self.x2_names)
        try:
            self.X1 = np.asarray(self.X1, dtype=float).reshape(n, len(self.x1_names))
            self.X2 = np.asarray(self.X2, dtype=float).reshape(n, len(self.x2_names))
        except ValueError:
            raise InvalidInputError("column names do not match covariate matrices") from None
        if self.y.shape != (n,):
            raise InvalidInputError("t and y lengths differ")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise InvalidInputError("y must be 0/1")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise InvalidInputError("t must be strictly increasing")

    def __len__(self):
        return self.t.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinarySeriesDataset):
            return NotImplemented
        return (
            self.x1_names == other.x1_names
            and self.x2_names == other.x2_names
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X1, other.X1)
            and np.array_equal(self.X2, other.X2)
        )

    @property
    def fixed_design(self) -> np.ndarray:
        """Fixed-effect covariates on the model scale (log columns transformed)."""
        return transform_columns(self.x1_names, self.X1) if len(self) else self.X1

    @property
    def gp_inputs(self) -> np.ndarray:
        return transform_columns(self.x2_names, self.X2) if len(self) else self.X2

    @property
    def gap_rows(self) -> np.ndarray:
        """Indices of rows whose predecessor is not at ``t - 1``."""
        return np.flatnonzero(np.diff(self.t) != 1) + 1

    def take(self, idx) -> "BinarySeriesDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return BinarySeriesDataset(
            self.t[idx], self.y[idx], self.X1[idx], self.X2[idx], self.x1_names, self.x2_names
        )

    def with_lag(self) -> "BinarySeriesDataset":
        """Append ``lag_y = y[i-1]`` to the fixed effects.

        The first row has no predecessor and rows after a gap in ``t`` have the
        wrong one, so all of those are dropped; ``dropped_rows`` counts them.
        """
        if LAG_NAME in self.x1_names:
            return self
        n = len(self)
        lag = np.zeros(n)
        lag[1:] = self.y[:-1]
        keep = np.ones(n, dtype=bool)
        keep[:1] = False
        keep[self.gap_rows] = False
        out = BinarySeriesDataset(
            self.t[keep],
            self.y[keep],
            np.column_stack([self.X1, lag])[keep],
            self.X2[keep],
            self.x1_names + (LAG_NAME,),
            self.x2_names,
        )
        out.dropped_rows = int(n - keep.sum())
        return out

    def without_columns(self, names) -> "BinarySeriesDataset":
        keep = [i for i, nm in enumerate(self.x1_names) if nm not in set(names)]
        return BinarySeriesDataset(
            self.t, self.y, self.X1[:, keep], self.X2, [self.x1_names[i] for i in keep], self.x2_names
        )


def _parse_float(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise LoadError(f"malformed number {text!r}", row=row, column=col) from None
    if not np.isfinite(v):
        raise LoadError(f"non-finite value {text!r}", row=row, column=col)
    return v


def load_csv(path, lag: bool = False) -> BinarySeriesDataset:
    """Read and validate a dataset. Rows are numbered from 1, excluding the header.

    With ``lag=True`` the lag-of-y column is built (see
    :meth:`BinarySeriesDataset.with_lag`) and the number of gap rows dropped is
    available as ``dropped_rows``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise LoadError("empty file") from None
        for required in ("t", "y"):
            if required not in header:
                raise LoadError(f"missing mandatory column {required!r}")
        if len(set(header)) != len(header):
            raise LoadError("duplicate column names in header")
        i_t, i_y = header.index("t"), header.index("y")
        x1_cols = [i for i, h in enumerate(header) if h.startswith("x1_")]
        x2_cols = [i for i, h in enumerate(header) if h.startswith("x2_")]

        t, y, X1, X2 = [], [], [], []
        seen = set()
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise LoadError(f"expected {len(header)} fields, found {len(row)}", row=row_no)
            tv = _parse_float(row[i_t], row_no, "t")
            if tv != int(tv):
                raise LoadError(f"time index must be an integer, got {row[i_t]!r}", row=row_no, column="t")
            tv = int(tv)
            if tv in seen:
                raise LoadError(f"duplicate time index {tv}", row=row_no, column="t")
            if t and tv < t[-1]:
                raise LoadError("time index not increasing", row=row_no, column="t")
            seen.add(tv)
            yv = row[i_y].strip()
            if yv not in ("0", "1", "0.0", "1.0"):
                raise LoadError(f"response must be 0 or 1, got {yv!r}", row=row_no, column="y")
            t.append(tv)
            y.append(int(float(yv)))
            X1.append([_parse_float(row[i], row_no, header[i]) for i in x1_cols])
            X2.append([_parse_float(row[i], row_no, header[i]) for i in x2_cols])
            for i in x1_cols + x2_cols:
                if header[i][3:].startswith("log_") and float(row[i]) <= 0:
                    raise LoadError("log-flagged column must be positive", row=row_no, column=header[i])

    n = len(t)
    x1_names = [header[i][3:] for i in x1_cols]
    if x2_cols:
        x2_names = [header[i][3:] for i in x2_cols]
        X2a = np.array(X2, dtype=float).reshape(n, len(x2_cols))
    else:
        x2_names = ["t"]
        X2a = np.array(t, dtype=float).reshape(n, 1)
    data = BinarySeriesDataset(
        np.array(t, dtype=np.int64),
        np.array(y, dtype=np.int64),
        np.array(X1, dtype=float).reshape(n, len(x1_cols)),
        X2a,
        x1_names,
        x2_names,
    )
    return data.with_lag() if lag else data


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, rows, preamble=()) -> None:
    """CSV with ``repr`` floats; ``preamble`` lines are written first as ``# `` comments."""
    buf = io.StringIO()
    for line in preamble:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    atomic_write_text(path, buf.getvalue())


def write_csv(path, data: BinarySeriesDataset) -> None:
    header = ["t", "y"] + [f"x1_{n}" for n in data.x1_names] + [f"x2_{n}" for n in data.x2_names]
    rows = (
        [int(data.t[i]), int(data.y[i])] + [float(v) for v in data.X1[i]] + [float(v) for v in data.X2[i]]
        for i in range(len(data))
    )
    write_table(path, header, rows)


def split_data(data: BinarySeriesDataset, train_n: int, test_n: int | None = None, mode: str = "sequential", seed=None):
    """Split into ``(train, test)``.

    ``sequential`` takes the first ``train_n`` rows for training and the next
    ``test_n`` (default: all remaining) for testing. ``random`` samples
    ``train_n + test_n`` rows without replacement using ``seed``; both parts
    are kept in time order.
    """
    n = len(data)
    if test_n is None:
        test_n = n - train_n
    if train_n < 1 or test_n < 0 or train_n + test_n > n:
        raise InvalidInputError(f"cannot split {n} rows into {train_n} train + {test_n} test")
    if mode == "sequential":
        return data.take(np.arange(train_n)), data.take(np.arange(train_n, train_n + test_n))
    if mode == "random":
        rng = np.random.default_rng(seed)
        pick = rng.choice(n, size=train_n + test_n, replace=False)
        return data.take(np.sort(pick[:train_n])), data.take(np.sort(pick[train_n:]))
    raise InvalidInputError(f"unknown split mode {mode!r}")
