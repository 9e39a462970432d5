"""Return-series ingestion and validation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError

# Series shorter than this are refused by the estimation routines (kernel
# asymptotics need Th to be meaningfully large); loading alone has no floor.
MIN_ESTIMATION_LENGTH = 50


@dataclass(frozen=True)
class ReturnSeries:
    """An ordered univariate series y_1..y_T.

    Values are stored as a float64 copy and must all be finite.
    """

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise DataError(f"series must be one-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise DataError("series is empty")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise DataError(f"non-finite value at position {bad[0]}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def T(self) -> int:
        return int(self.values.size)

    def require_estimable(self) -> None:
        """Raise unless the series is long enough for estimation."""
        if self.T < MIN_ESTIMATION_LENGTH:
            raise DataError(
                f"series has T={self.T}; estimation requires at least "
                f"{MIN_ESTIMATION_LENGTH} observations"
            )


def _parse_cell(text: str, row: int, col) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric value {text!r} at row {row}, column {col}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value at row {row}, column {col}")
    return v


def load_series(path, column=0, transform: str = "none", label: str | None = None) -> ReturnSeries:
    """Load one numeric column from a CSV file.

    Parameters
    ----------
    path : str or pathlib.Path
        CSV file; a header row is auto-detected by a non-numeric first line.
    column : int or str
        0-based column index, or a header name (requires a header row).
    transform : {"none", "log_return_pct"}
        "log_return_pct" converts a price column P_t to percent log returns
        100*(log P_t - log P_{t-1}), shortening the series by one.
    label : str, optional
        Label stored on the result; defaults to the column name or index.

    Returns
    -------
    ReturnSeries
    """
    if transform not in ("none", "log_return_pct"):
        raise DataError(f"unknown transform {transform!r}")
    # OSError (missing file, permissions) propagates untouched: callers
    # distinguish unreadable input from malformed content.
    with open(path, "r", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path} contains no data")

    first = rows[0]
    has_header = False
    for cell in first:
        try:
            float(cell)
        except ValueError:
            has_header = True
            break

    header = [c.strip() for c in first] if has_header else None
    data_rows = rows[1:] if has_header else rows

    if isinstance(column, str):
        if header is None:
            raise DataError(f"column {column!r} requested but file has no header row")
        try:
            col_idx = header.index(column)
        except ValueError:
            raise DataError(f"column {column!r} not found; header is {header}") from None
        col_name = column
    else:
        col_idx = int(column)
        if col_idx < 0:
            raise DataError(f"column index must be >= 0, got {col_idx}")
        col_name = header[col_idx] if header and col_idx < len(header) else str(col_idx)

    values = np.empty(len(data_rows))
    for i, row in enumerate(data_rows):
        rownum = i + 2 if has_header else i + 1
        if col_idx >= len(row):
            raise DataError(f"row {rownum} has no column {col_name}")
        values[i] = _parse_cell(row[col_idx], rownum, col_name)

    if transform == "log_return_pct":
        if values.size < 2:
            raise DataError("log_return_pct needs at least two prices")
        nonpos = np.flatnonzero(values <= 0)
        if nonpos.size:
            rownum = int(nonpos[0]) + (2 if has_header else 1)
            raise DataError(f"non-positive price at row {rownum}; cannot take log returns")
        values = 100.0 * np.diff(np.log(values))

    return ReturnSeries(values, label=label if label is not None else col_name)


def save_series(series: ReturnSeries, path) -> None:
    """Write a series as single-column CSV; round-trips float64 exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([series.label or "y"])
        for v in series.values:
            writer.writerow([repr(float(v))])


def sample_variance(series: ReturnSeries) -> float:
    """Population-form sample variance (1/T)*sum((y_t - mean)^2); needs T >= 2."""
    if series.T < 2:
        raise DataError("sample_variance needs at least two observations")
    y = series.values
    return float(np.mean((y - y.mean()) ** 2))
