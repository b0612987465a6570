"""Uniformly sampled signals, shared warning/error types and CSV helpers."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


class DDMapWarning(UserWarning):
    """Non-fatal condition raised by one of the pipeline stages."""


class PipelineError(RuntimeError):
    """A stage of the dynamic diffusion map pipeline failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


@dataclass(frozen=True)
class TimeSeries:
    """Real signal sampled at ``fs`` Hz, first sample at ``t0`` seconds."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if x.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise ValueError("fs must be a positive number")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    def replace(self, samples: np.ndarray, fs: float | None = None) -> "TimeSeries":
        return TimeSeries(samples, self.fs if fs is None else fs, self.t0, dict(self.meta))


def format_rows(header: list[str], columns: list[np.ndarray]) -> str:
    """Render columns as CSV text with 17 significant digits for floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    n = len(columns[0]) if columns else 0
    formatted = []
    for col in columns:
        col = np.asarray(col)
        if col.dtype.kind in "iub":
            formatted.append([str(int(v)) for v in col])
        elif col.dtype.kind == "f":
            formatted.append([FLOAT_FMT % v for v in col])
        else:
            formatted.append([str(v) for v in col])
    for i in range(n):
        writer.writerow([c[i] for c in formatted])
    return buf.getvalue()


def write_csv(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    Path(path).write_text(format_rows(header, columns), encoding="utf-8")


def read_csv_columns(path: str | Path) -> dict[str, list[str]]:
    """Read a headed CSV into a mapping of column name to raw string values."""
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0]:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: CSV has a header but no rows")
    cols: dict[str, list[str]] = {h: [] for h in header}
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for h, v in zip(header, row):
            cols[h].append(v.strip())
    return cols


def write_timeseries(path: str | Path, x: TimeSeries) -> None:
    write_csv(path, ["time", "value"], [x.times, x.samples])


def read_timeseries(path: str | Path, fs: float | None = None) -> TimeSeries:
    """Load a ``time,value`` CSV.

    The sampling rate is inferred from the median time step unless given.
    """
    cols = read_csv_columns(path)
    if "time" not in cols or "value" not in cols:
        raise ValueError(f"{path}: expected columns 'time,value'")
    t = np.array(cols["time"], dtype=float)
    v = np.array(cols["value"], dtype=float)
    if fs is None:
        if t.size < 2:
            raise ValueError(f"{path}: need at least two samples to infer fs")
        step = float(np.median(np.diff(t)))
        if step <= 0:
            raise ValueError(f"{path}: time column must be increasing")
        fs = round(1.0 / step, 6)
    return TimeSeries(v, fs, t0=float(t[0]))


@dataclass(frozen=True)
class LandmarkSequence:
    """Strictly increasing cycle-onset sample indices of a signal sampled at ``fs``."""

    indices: np.ndarray
    fs: float

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.size and not np.issubdtype(idx.dtype, np.integer):
            if not np.all(idx == np.round(idx)):
                raise ValueError("landmark indices must be integers")
        idx = idx.astype(np.int64).ravel()
        if np.any(np.diff(idx) <= 0):
            raise ValueError("landmark indices must be strictly increasing")
        if idx.size and idx[0] < 0:
            raise ValueError("landmark indices must be nonnegative")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return self.indices.size

    @property
    def times(self) -> np.ndarray:
        return self.indices / self.fs

    def check_bounds(self, n_samples: int) -> None:
        if self.indices.size and self.indices[-1] >= n_samples:
            raise ValueError("landmark index beyond the end of the signal")
