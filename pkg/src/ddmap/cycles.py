"""Landmark detection, pulse rejection, window excision and cycle normalization."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, signal

from .preprocessing import ms_to_samples
from .timeseries import DDMapWarning, LandmarkSequence, TimeSeries, write_csv

__all__ = [
    "LandmarkSequence",
    "CycleMatrix",
    "detect_landmarks",
    "reject_bad_pulses",
    "excise_cycles",
    "normalize_cycles",
    "window_extent",
]

DETECTOR_MODES = ("peak_threshold", "derivative_max", "external")


def window_extent(ms: float, fs: float) -> int:
    """``floor(ms * fs / 1000)``, guarded against representation error."""
    return int(math.floor(ms * fs / 1000.0 + 1e-9))


@dataclass(frozen=True)
class CycleMatrix:
    """Excised cycles, one per row, with the landmark at column ``left``."""

    rows: np.ndarray
    left_ms: float
    right_ms: float
    fs: float
    landmark_indices: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("cycle matrix must be two-dimensional")
        idx = np.asarray(self.landmark_indices, dtype=np.int64)
        if idx.size != rows.shape[0]:
            raise ValueError("one landmark per row required")
        if rows.shape[1] != self.left + self.right + 1:
            raise ValueError("row length does not match the excision window")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "landmark_indices", idx)

    @property
    def left(self) -> int:
        return window_extent(self.left_ms, self.fs)

    @property
    def right(self) -> int:
        return window_extent(self.right_ms, self.fs)

    @property
    def n_cycles(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.landmark_indices / self.fs

    def subset(self, keep) -> "CycleMatrix":
        return CycleMatrix(self.rows[keep], self.left_ms, self.right_ms, self.fs,
                           self.landmark_indices[keep], self.normalized)

    def sidecar(self) -> dict:
        return {
            "left_ms": self.left_ms,
            "right_ms": self.right_ms,
            "fs": self.fs,
            "landmark_indices": [int(i) for i in self.landmark_indices],
            "normalized": self.normalized,
        }

    def export(self, csv_path: str | Path, json_path: str | Path | None = None) -> None:
        header = [f"x_{j + 1}" for j in range(self.p)]
        write_csv(csv_path, header, list(self.rows.T))
        if json_path is None:
            json_path = Path(csv_path).with_suffix(".json")
        Path(json_path).write_text(json.dumps(self.sidecar(), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# landmark detection


def _rolling_stat(v: np.ndarray, w: int, fn) -> np.ndarray:
    return fn(v, size=w, mode="nearest")


def _adaptive_threshold(v: np.ndarray, fs: float, k: float, window_s: float,
                        rel_height: float) -> np.ndarray:
    w = max(3, min(ms_to_samples(window_s * 1000.0, fs, odd=True), v.size | 1))
    med = _rolling_stat(v, w, ndimage.median_filter)
    mad = _rolling_stat(np.abs(v - med), w, ndimage.median_filter)
    top = _rolling_stat(v, w, ndimage.maximum_filter)
    thr = np.maximum(med + k * 1.4826 * mad, med + rel_height * (top - med))
    # a flat stretch has top == med; require a strict excursion above the median
    return np.where(top > med, thr, np.inf)


def _peak_threshold(x: TimeSeries, k: float, window_s: float, rel_height: float,
                    refractory_ms: float) -> np.ndarray:
    v = np.asarray(x.samples, dtype=float)
    thr = _adaptive_threshold(v, x.fs, k, window_s, rel_height)
    distance = max(1, ms_to_samples(refractory_ms, x.fs))
    peaks, _ = signal.find_peaks(v, height=thr, distance=distance)
    return peaks


def _derivative_max(x: TimeSeries, k: float, window_s: float, rel_height: float,
                    refractory_ms: float) -> np.ndarray:
    v = np.asarray(x.samples, dtype=float)
    thr = _adaptive_threshold(v, x.fs, k, window_s, rel_height)
    d = np.diff(v)
    rising = d > 0
    if not np.any(rising):
        return np.array([], dtype=np.int64)
    edges = np.flatnonzero(np.diff(np.concatenate([[0], rising.astype(np.int8), [0]])))
    starts, stops = edges[::2], edges[1::2]
    # an ascending run d[s:e] lifts v from v[s] to v[e]; keep runs that end above threshold
    crossing = v[stops] > thr[stops]
    cands = np.array([s + int(np.argmax(d[s:e])) for s, e in zip(starts[crossing], stops[crossing])],
                     dtype=np.int64)
    # the landmark is the sample after the steepest difference d[i] = v[i+1] - v[i]
    cands = cands + 1
    refractory = max(1, ms_to_samples(refractory_ms, x.fs))
    keep: list[int] = []
    for c in cands:
        if keep and c - keep[-1] < refractory:
            if d[c - 1] > d[keep[-1] - 1]:
                keep[-1] = int(c)
            continue
        keep.append(int(c))
    return np.asarray(keep, dtype=np.int64)


def detect_landmarks(
    x: TimeSeries,
    mode: str = "peak_threshold",
    *,
    external=None,
    k: float = 4.0,
    window_s: float = 2.0,
    rel_height: float = 0.5,
    refractory_ms: float = 250.0,
) -> LandmarkSequence:
    """Locate one landmark per oscillatory cycle.

    ``peak_threshold`` keeps local maxima above an adaptive threshold, the
    larger of ``rolling median + k * rolling MAD`` (MAD scaled to a normal
    standard deviation) and ``rolling median + rel_height * (rolling max -
    rolling median)``, at least ``refractory_ms`` apart. ``derivative_max``
    takes every ascending run of the signal that ends above the same
    threshold and returns the point where the signal rises fastest within it.
    ``external`` passes caller-supplied indices through after validation.
    """
    if mode not in DETECTOR_MODES:
        raise ValueError(f"unknown landmark detector {mode!r}")
    if mode == "external":
        if external is None:
            raise ValueError("external mode needs landmark indices")
        lm = external if isinstance(external, LandmarkSequence) else LandmarkSequence(np.asarray(external), x.fs)
        lm.check_bounds(len(x))
        if len(lm) == 0:
            raise ValueError("no cycles detected")
        return LandmarkSequence(lm.indices, x.fs)
    finder = _peak_threshold if mode == "peak_threshold" else _derivative_max
    idx = finder(x, k, window_s, rel_height, refractory_ms)
    if idx.size == 0:
        raise ValueError("no cycles detected")
    return LandmarkSequence(idx, x.fs)


# ---------------------------------------------------------------------------
# quality control and excision


def count_wide_maxima(segment: np.ndarray, fs: float, prominence_frac: float = 0.25,
                      min_width_ms: float = 50.0) -> int:
    """Local maxima with prominence >= ``prominence_frac`` of the segment range and
    half-prominence width >= ``min_width_ms``."""
    if segment.size < 3:
        return 0
    rng = float(np.ptp(segment))
    if rng == 0:
        return 0
    peaks, _ = signal.find_peaks(segment, prominence=prominence_frac * rng,
                                 width=min_width_ms * fs / 1000.0)
    return int(peaks.size)


def reject_bad_pulses(
    x: TimeSeries,
    lm: LandmarkSequence,
    max_wide_maxima: int = 3,
    prominence_frac: float = 0.25,
    min_width_ms: float = 50.0,
) -> LandmarkSequence:
    """Drop pulses whose inter-landmark segment has too many wide local maxima.

    Pulse ``i`` is judged on ``x[t_i : t_{i+1}]``; the last pulse on the tail
    of the signal after its landmark.
    """
    if len(lm) == 0:
        raise ValueError("no landmarks to check")
    v = np.asarray(x.samples, dtype=float)
    bounds = np.concatenate([lm.indices, [v.size]])
    keep = np.array([
        count_wide_maxima(v[bounds[i]:bounds[i + 1]], x.fs, prominence_frac, min_width_ms) <= max_wide_maxima
        for i in range(len(lm))
    ])
    if not np.any(keep):
        raise ValueError("all pulses rejected")
    return LandmarkSequence(lm.indices[keep], lm.fs)


def excise_cycles(x: TimeSeries, lm: LandmarkSequence, left_ms: float = 80.0,
                  right_ms: float = 400.0) -> CycleMatrix:
    """Cut ``x[t_i - left : t_i + right + 1]`` around every landmark.

    ``left`` and ``right`` are ``floor(ms * fs / 1000)`` samples. Landmarks
    whose window leaves the signal are dropped with a warning. Windows of
    neighbouring cycles may overlap.
    """
    a = window_extent(left_ms, x.fs)
    b = window_extent(right_ms, x.fs)
    p = a + b + 1
    if p <= 2:
        raise ValueError(f"excision window of {p} samples is too short")
    v = np.asarray(x.samples, dtype=float)
    idx = lm.indices
    inside = (idx - a >= 0) & (idx + b < v.size)
    if not np.all(inside):
        warnings.warn(f"dropped {int(np.count_nonzero(~inside))} landmark(s) whose window "
                      "exceeds the signal bounds", DDMapWarning, stacklevel=2)
    idx = idx[inside]
    if idx.size == 0:
        raise ValueError("no cycles detected inside the signal bounds")
    rows = v[idx[:, None] + np.arange(-a, b + 1)[None, :]]
    return CycleMatrix(rows, left_ms, right_ms, x.fs, idx, normalized=False)


def normalize_cycles(X: CycleMatrix, ddof: int = 0) -> CycleMatrix:
    """Z-score every row: subtract its mean, divide by its standard deviation.

    ``ddof=0`` (population convention) by default.
    """
    rows = X.rows
    mu = rows.mean(axis=1, keepdims=True)
    centered = rows - mu
    sigma = np.sqrt((centered ** 2).sum(axis=1, keepdims=True) / (rows.shape[1] - ddof))
    scale = np.maximum(np.abs(rows).max(axis=1, keepdims=True), np.finfo(float).tiny)
    if np.any(sigma <= 1e-14 * scale):
        bad = np.flatnonzero(sigma.ravel() <= 1e-14 * scale.ravel())
        raise ValueError(f"degenerate cycle (constant row) at index {int(bad[0])}")
    return CycleMatrix(centered / sigma, X.left_ms, X.right_ms, X.fs, X.landmark_indices, True)
