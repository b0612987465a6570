"""Dynamic diffusion map orchestration and downstream analytics.

``ddmap`` chains conditioning, landmarking, excision and the diffusion map.
The embedding is then compressed to its top left-singular vector, beats are
split by the sign of that vector (the larger class is taken as normal), and
an embedding coordinate restricted to normal beats is resampled to a uniform
grid and locally standardized, giving an ECG-derived respiration trace.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from numpy.lib.stride_tricks import sliding_window_view

from . import cycles as cyc
from . import preprocessing as pre
from .diffusion import DiffusionEmbedding, KernelConfig, diffusion_map
from .timeseries import DDMapWarning, LandmarkSequence, PipelineError, TimeSeries, write_csv

MODES = ("ecg", "abp", "custom")


@dataclass
class PipelineConfig:
    """Every knob of the pipeline; ``for_mode`` fills in the published defaults."""

    mode: str = "custom"
    # conditioning
    upsample_fs: float | None = None
    lowpass_order: int | None = None
    lowpass_cutoff: float = 40.0
    baseline_two_step: bool = False
    detrend_window_s: float | None = None
    # landmarks
    detector: str = "peak_threshold"
    detector_k: float = 4.0
    detector_window_s: float = 2.0
    detector_rel_height: float = 0.5
    refractory_ms: float = 250.0
    reject_pulses: bool = False
    max_wide_maxima: int = 3
    prominence_frac: float = 0.25
    min_width_ms: float = 50.0
    # excision
    left_ms: float = 80.0
    right_ms: float | None = 400.0
    normalize: bool = False
    ddof: int = 0
    # diffusion map
    kernel: KernelConfig = field(default_factory=KernelConfig)
    # analytics
    edr_coordinate: int | str = "auto"
    interp_fs: float = 4.0
    halfwidth: int = 10

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if isinstance(self.kernel, dict):
            self.kernel = KernelConfig(**self.kernel)
        if self.detector not in cyc.DETECTOR_MODES:
            raise ValueError(f"unknown landmark detector {self.detector!r}")
        if self.edr_coordinate != "auto" and not (isinstance(self.edr_coordinate, int)
                                                  and self.edr_coordinate >= 1):
            raise ValueError("edr_coordinate must be 'auto' or a positive integer")

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> "PipelineConfig":
        """Defaults for ``ecg`` (lowpass, two-step baseline, 80/400 ms window,
        t=10, d=32, quartile bandwidth) or ``abp`` (2 kHz upsampling, 2 s
        median detrend, steepest-upstroke landmarks, pulse rejection, z-scored
        pulses, t=1, 40-NN 25th-percentile bandwidth)."""
        kernel_over = overrides.pop("kernel", {}) or {}
        if isinstance(kernel_over, KernelConfig):
            kernel_over = kernel_over.to_dict()
        if mode == "ecg":
            base = dict(mode="ecg", lowpass_order=3, lowpass_cutoff=40.0, baseline_two_step=True,
                        detector="peak_threshold", left_ms=80.0, right_ms=400.0, normalize=False)
            kernel = dict(bandwidth_rule="quartile_all_pairs", alpha=1.0, t=10.0, d=32)
        elif mode == "abp":
            base = dict(mode="abp", upsample_fs=2000.0, detrend_window_s=2.0, detector="derivative_max",
                        reject_pulses=True, max_wide_maxima=3, left_ms=80.0, right_ms=None,
                        normalize=True)
            kernel = dict(bandwidth_rule="knn_percentile", k=40, pct=25.0, alpha=1.0, t=1.0, d=32)
        elif mode == "custom":
            base, kernel = dict(mode="custom"), {}
        else:
            raise ValueError(f"unknown mode {mode!r}")
        names = {f.name for f in fields(cls)}
        unknown = set(overrides) - names
        if unknown:
            raise ValueError(f"unknown pipeline options: {sorted(unknown)}")
        base.update(overrides)
        kernel.update(kernel_over)
        return cls(kernel=KernelConfig(**kernel), **base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DynamicsTrace:
    """Values indexed by time in seconds: per-cycle or on a uniform grid."""

    times: np.ndarray
    values: np.ndarray
    source: str
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace values must be finite")

    def __len__(self) -> int:
        return self.values.size

    def export(self, path) -> None:
        header, cols = ["time_s", "value"], [self.times, self.values]
        if self.labels is not None:
            header.append("label")
            cols.append(np.asarray(self.labels))
        write_csv(path, header, cols)


@dataclass
class ClusterResult:
    """Sign split of the compressed embedding; the smaller class is called ectopic."""

    c1: np.ndarray
    c2: np.ndarray
    ectopic_set: np.ndarray
    normal_set: np.ndarray
    ectopic_is_c1: bool

    @property
    def n(self) -> int:
        return self.c1.size + self.c2.size

    def labels(self) -> np.ndarray:
        """1 for ectopic cycles, 0 for normal ones."""
        lab = np.zeros(self.n, dtype=np.int64)
        lab[self.ectopic_set] = 1
        return lab

    def sign_classes(self) -> np.ndarray:
        cls = np.full(self.n, 2, dtype=np.int64)
        cls[self.c1] = 1
        return cls


class DDMapResult(NamedTuple):
    embedding: DiffusionEmbedding
    landmarks: LandmarkSequence
    cycles: cyc.CycleMatrix
    signal: TimeSeries


@dataclass
class PipelineResult:
    config: PipelineConfig
    ddmap: DDMapResult
    u_trace: DynamicsTrace
    clusters: ClusterResult
    edr: DynamicsTrace | None
    timings: dict


def _stage(name: str, timings: dict | None, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        return fn(*args, **kwargs)
    except (ValueError, RuntimeError) as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(name, str(exc)) from exc
    finally:
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def condition(x: TimeSeries, cfg: PipelineConfig, timings: dict | None = None) -> TimeSeries:
    """Apply the configured conditioning steps in order."""
    if cfg.upsample_fs is not None and cfg.upsample_fs > x.fs:
        x = _stage("upsample", timings, pre.fourier_upsample, x, cfg.upsample_fs)
    if cfg.lowpass_order:
        x = _stage("lowpass", timings, pre.butterworth_lowpass_bidirectional, x,
                   cfg.lowpass_order, cfg.lowpass_cutoff)
    if cfg.baseline_two_step:
        x = _stage("baseline", timings, pre.remove_baseline_two_step, x)
    if cfg.detrend_window_s:
        x = _stage("detrend", timings, pre.detrend_median, x, cfg.detrend_window_s)
    return x


def _rescale_landmarks(landmarks, from_fs: float, to_fs: float) -> np.ndarray:
    idx = np.asarray(getattr(landmarks, "indices", landmarks))
    src = getattr(landmarks, "fs", from_fs)
    return np.round(idx * (to_fs / src)).astype(np.int64)


def extract(y: TimeSeries, cfg: PipelineConfig, landmarks=None, input_fs: float | None = None,
            timings: dict | None = None) -> tuple[LandmarkSequence, cyc.CycleMatrix]:
    """Landmark, screen, excise and (optionally) normalize the cycles of a conditioned signal.

    External ``landmarks`` are sample indices at ``input_fs`` (default: the
    rate of ``y``) or a ``LandmarkSequence``; they are rescaled to ``y.fs``.
    """
    if landmarks is not None:
        ext = _rescale_landmarks(landmarks, y.fs if input_fs is None else input_fs, y.fs)
        lm = _stage("landmarks", timings, cyc.detect_landmarks, y, "external", external=ext)
    else:
        if cfg.detector == "external":
            raise PipelineError("landmarks", "external detector selected but no landmarks supplied")
        lm = _stage("landmarks", timings, cyc.detect_landmarks, y, cfg.detector, k=cfg.detector_k,
                    window_s=cfg.detector_window_s, rel_height=cfg.detector_rel_height,
                    refractory_ms=cfg.refractory_ms)
    if cfg.reject_pulses:
        lm = _stage("reject", timings, cyc.reject_bad_pulses, y, lm, cfg.max_wide_maxima,
                    cfg.prominence_frac, cfg.min_width_ms)
    right_ms = cfg.right_ms
    if right_ms is None:
        # window spans the shortest inter-landmark interval
        if len(lm) < 2:
            raise PipelineError("excise", "need two landmarks to size the window")
        shortest = int(np.min(np.diff(lm.indices)))
        right = shortest - cyc.window_extent(cfg.left_ms, y.fs)
        if right < 1:
            raise PipelineError("excise", "inter-landmark interval shorter than the left extent")
        right_ms = right * 1000.0 / y.fs
    X = _stage("excise", timings, cyc.excise_cycles, y, lm, cfg.left_ms, right_ms)
    if cfg.normalize:
        X = _stage("normalize", timings, cyc.normalize_cycles, X, cfg.ddof)
    return LandmarkSequence(X.landmark_indices, y.fs), X


def ddmap(x: TimeSeries, cfg: PipelineConfig, landmarks=None, timings: dict | None = None) -> DDMapResult:
    """Condition, landmark, excise, (normalize) and embed the cycles of ``x``.

    ``landmarks`` (sample indices at the input rate, or a ``LandmarkSequence``)
    switches the detector to external mode.
    """
    y = condition(x, cfg, timings)
    lm, X = extract(y, cfg, landmarks, x.fs, timings)
    if X.n_cycles <= cfg.kernel.d:
        raise PipelineError("embed", f"need more than d={cfg.kernel.d} cycles, got {X.n_cycles}")
    emb = _stage("embed", timings, diffusion_map, X, cfg.kernel)
    return DDMapResult(emb, lm, X, y)


def compress_svd(E, times=None) -> DynamicsTrace:
    """Top left-singular vector of the embedding matrix as a per-cycle trace."""
    M = np.asarray(getattr(E, "coords", E), dtype=float)
    if M.ndim != 2 or not np.any(M):
        raise ValueError("embedding matrix is zero")
    U, _, _ = np.linalg.svd(M, full_matrices=False)
    u = U[:, 0]
    i = int(np.argmax(np.abs(u)))
    if u[i] < 0:
        u = -u
    t = np.arange(M.shape[0], dtype=float) if times is None else times
    return DynamicsTrace(t, u, "svd_U")


def sign_cluster(U) -> ClusterResult:
    """``C1 = {U >= 0}``, ``C2 = {U < 0}``; the smaller set is taken as ectopic.

    With equal sizes ``C1`` is declared ectopic; a one-sided split yields an
    empty ectopic set. Both cases emit a ``DDMapWarning``.
    """
    u = np.asarray(getattr(U, "values", U), dtype=float)
    c1 = np.flatnonzero(u >= 0)
    c2 = np.flatnonzero(u < 0)
    if c1.size == 0 or c2.size == 0:
        warnings.warn("single morphology class: every cycle has the same sign", DDMapWarning, stacklevel=2)
        normal = c1 if c1.size else c2
        return ClusterResult(c1, c2, np.array([], dtype=np.int64), normal, False)
    if c1.size == c2.size:
        warnings.warn("clusters have equal size; declaring C1 ectopic", DDMapWarning, stacklevel=2)
    ectopic_is_c1 = c1.size <= c2.size
    ect, norm = (c1, c2) if ectopic_is_c1 else (c2, c1)
    return ClusterResult(c1, c2, ect, norm, ectopic_is_c1)


def interpolate_trace(times, values, target_fs: float = 4.0, duration: float | None = None) -> DynamicsTrace:
    """Natural cubic spline through ``(times, values)`` on a uniform grid.

    The grid starts at the first support time and stops at the last one;
    with ``duration`` it holds at most ``floor(target_fs * duration)`` points.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 4:
        raise ValueError("need at least 4 support points to interpolate")
    spline = CubicSpline(t, v, bc_type="natural")
    n = int(np.floor((t[-1] - t[0]) * target_fs + 1e-9)) + 1
    if duration is not None:
        n = min(n, int(np.floor(target_fs * duration)))
    grid = t[0] + np.arange(n) / target_fs
    return DynamicsTrace(grid, spline(grid), "interpolated")


def sliding_normalize(V, halfwidth: int = 10) -> DynamicsTrace:
    """Subtract the centered local mean and divide by the local RMS deviation.

    Both use the window ``i - halfwidth .. i + halfwidth``, truncated at the
    ends. Where the local deviation vanishes the output is 0.
    """
    trace = V if isinstance(V, DynamicsTrace) else None
    v = np.asarray(trace.values if trace is not None else V, dtype=float)
    w = 2 * halfwidth + 1
    if v.size < w:
        raise ValueError(f"need at least {w} samples for halfwidth {halfwidth}")
    padded = np.concatenate([np.full(halfwidth, np.nan), v, np.full(halfwidth, np.nan)])
    win = sliding_window_view(padded, w)
    mean = np.nanmean(win, axis=1)
    dev = win - mean[:, None]
    sd = np.sqrt(np.nanmean(dev ** 2, axis=1))
    scale = np.nanmax(np.abs(win), axis=1)
    flat = sd <= 1e-12 * np.maximum(scale, np.finfo(float).tiny)
    out = np.zeros_like(v)
    out[~flat] = (v[~flat] - mean[~flat]) / sd[~flat]
    if np.any(flat):
        warnings.warn(f"{int(np.count_nonzero(flat))} sample(s) with zero local deviation set to 0",
                      DDMapWarning, stacklevel=2)
    times = trace.times if trace is not None else np.arange(v.size, dtype=float)
    return DynamicsTrace(times, out, "normalized_V")


def run_pipeline(x: TimeSeries, cfg: PipelineConfig, landmarks=None, with_edr: bool | None = None) -> PipelineResult:
    """``ddmap`` followed by SVD compression, sign clustering and (ECG) the EDR trace."""
    timings: dict = {}
    res = ddmap(x, cfg, landmarks, timings)
    t_cycles = res.signal.t0 + res.landmarks.times
    u = _stage("compress", timings, compress_svd, res.embedding, t_cycles)
    clusters = _stage("cluster", timings, sign_cluster, u)
    u.labels = clusters.labels()
    edr = None
    if with_edr is None:
        with_edr = cfg.mode == "ecg"
    if with_edr:
        edr = _stage("edr", timings, _edr_from, res, clusters, cfg, x.duration)
    return PipelineResult(cfg, res, u, clusters, edr, timings)


def edr_coordinate(coords: np.ndarray, normal: np.ndarray, rtol: float = 1e-6,
                   min_spread: float = 0.1) -> int:
    """First coordinate (1-based) that varies across the bulk of the normal beats.

    Small isolated groups of cycles give near-indicator coordinates: constant
    on almost every normal beat and nonzero on a handful. Such coordinates have
    a median absolute deviation far below their standard deviation and are
    skipped, as are coordinates that are constant over the normal set. When
    every coordinate is of that kind the first one is returned with a warning.
    """
    sub = coords[normal]
    std = sub.std(axis=0)
    mad = 1.4826 * np.median(np.abs(sub - np.median(sub, axis=0)), axis=0)
    scale = np.maximum(np.abs(coords).max(axis=0), np.finfo(float).tiny)
    varying = np.flatnonzero((std > rtol * scale) & (mad >= min_spread * std))
    if varying.size == 0:
        warnings.warn("no embedding coordinate varies across the normal beats; using coordinate 1",
                      DDMapWarning, stacklevel=2)
        return 1
    return int(varying[0]) + 1


def _edr_from(res: DDMapResult, clusters: ClusterResult, cfg: PipelineConfig, duration: float) -> DynamicsTrace:
    k = cfg.edr_coordinate
    if k == "auto":
        k = edr_coordinate(res.embedding.coords, np.sort(clusters.normal_set))
    if k > res.embedding.d:
        raise ValueError(f"edr_coordinate {k} exceeds embedding dimension {res.embedding.d}")
    normal = np.sort(clusters.normal_set)
    times = res.signal.t0 + res.landmarks.times[normal]
    values = res.embedding.coords[normal, k - 1]
    V = interpolate_trace(times, values, cfg.interp_fs, duration)
    return sliding_normalize(V, cfg.halfwidth)


def derive_edr(x: TimeSeries, cfg: PipelineConfig | None = None, landmarks=None) -> DynamicsTrace:
    """ECG-derived respiration from the diffusion coordinates of normal beats."""
    cfg = PipelineConfig.for_mode("ecg") if cfg is None else cfg
    return run_pipeline(x, cfg, landmarks, with_edr=True).edr
