"""Signal conditioning: zero-phase lowpass, median baselines, Fourier upsampling."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import ndimage, signal

from .timeseries import DDMapWarning, TimeSeries


def ms_to_samples(ms: float, fs: float, odd: bool = False) -> int:
    """Round-half-up conversion of a duration in milliseconds to samples."""
    n = int(math.floor(ms * fs / 1000.0 + 0.5 + 1e-9))
    if odd and n % 2 == 0:
        n += 1
    return n


def butterworth_lowpass_bidirectional(x: TimeSeries, order: int = 3, cutoff: float = 40.0) -> TimeSeries:
    """Forward-backward Butterworth lowpass (zero phase, squared magnitude response).

    The signal is padded by odd reflection over ``3 * order`` samples to
    suppress start-up transients.
    """
    if order < 1:
        raise ValueError("filter order must be at least 1")
    nyq = 0.5 * x.fs
    if not 0 < cutoff < nyq:
        raise ValueError(f"cutoff must lie in (0, {nyq}) Hz (Nyquist), got {cutoff}")
    b, a = signal.butter(order, cutoff / nyq, btype="low")
    padlen = min(3 * order, len(x) - 1)
    y = signal.filtfilt(b, a, x.samples, padtype="odd", padlen=padlen)
    return x.replace(y)


def _median_truncated(v: np.ndarray, w: int) -> np.ndarray:
    half = w // 2
    n = v.size
    out = ndimage.median_filter(v, size=w, mode="nearest")
    # windows that cross the signal ends are shrunk instead of padded
    for i in range(min(half, n)):
        out[i] = np.median(v[: min(n, i + half + 1)])
    for i in range(max(n - half, half), n):
        out[i] = np.median(v[max(0, i - half):])
    return out


def median_filter(x: TimeSeries, window_ms: float) -> TimeSeries:
    """Centered running median; windows at the edges are truncated."""
    w = ms_to_samples(window_ms, x.fs, odd=True)
    if w < 3:
        raise ValueError(f"median window of {window_ms} ms is shorter than 3 samples")
    if w > len(x):
        raise ValueError(f"median window ({w} samples) is longer than the signal ({len(x)})")
    return x.replace(_median_truncated(np.asarray(x.samples, dtype=float).copy(), w))


def remove_baseline_two_step(x: TimeSeries, first_ms: float = 200.0, second_ms: float = 600.0) -> TimeSeries:
    """Subtract the baseline estimated by a 200 ms then a 600 ms running median."""
    baseline = median_filter(median_filter(x, first_ms), second_ms)
    return x.replace(x.samples - baseline.samples)


def fourier_upsample(x: TimeSeries, target_fs: float) -> TimeSeries:
    """Band-limited interpolation by zero-padding the discrete Fourier transform.

    For an even-length input the Nyquist coefficient is spread over a cosine
    and a sine at the old Nyquist rate. The sine vanishes at the original
    sampling instants, so the input samples are reproduced, and the pair
    carries the same energy as the original coefficient, so
    ``sum(x**2) / fs`` is preserved.
    """
    if target_fs <= x.fs:
        raise ValueError("target_fs must exceed the current sampling rate")
    n = len(x)
    m_float = n * target_fs / x.fs
    m = int(round(m_float))
    if abs(m - m_float) > 1e-6 * max(1.0, m_float):
        raise ValueError("target_fs * n / fs must be an integer number of samples")
    X = np.fft.rfft(x.samples)
    Y = np.zeros(m // 2 + 1, dtype=complex)
    if n % 2 == 0:
        Y[: n // 2] = X[: n // 2]
        Y[n // 2] = 0.5 * X[n // 2] * (1 - 1j)
    else:
        Y[: X.size] = X
    y = np.fft.irfft(Y, m) * (m / n)
    return TimeSeries(y, float(target_fs), x.t0, dict(x.meta))


def dominant_period(x: TimeSeries, min_s: float = 0.2, max_s: float = 5.0) -> float | None:
    """Period of the strongest repetition, from the autocorrelation of the first difference."""
    d = np.diff(x.samples)
    d = d - d.mean()
    if not np.any(d):
        return None
    nfft = 1 << int(np.ceil(np.log2(2 * d.size)))
    spec = np.fft.rfft(d, nfft)
    ac = np.fft.irfft(spec * np.conj(spec), nfft)[: d.size]
    lo = max(1, int(min_s * x.fs))
    hi = min(d.size - 1, int(max_s * x.fs))
    if hi <= lo:
        return None
    peaks, _ = signal.find_peaks(ac[lo:hi])
    if peaks.size == 0:
        return None
    best = peaks[np.argmax(ac[lo:hi][peaks])]
    return (best + lo) / x.fs


def detrend_median(x: TimeSeries, window_s: float = 2.0, period_s: float | None = None) -> TimeSeries:
    """Subtract a running median of ``window_s`` seconds.

    A window shorter than one oscillation period makes the median follow the
    pulses themselves; this is reported with a ``DDMapWarning``. The period is
    estimated from the signal unless ``period_s`` is given.
    """
    trend = median_filter(x, window_s * 1000.0)
    period = dominant_period(x) if period_s is None else period_s
    if period is not None and window_s < period:
        warnings.warn(
            f"detrending window {window_s} s is shorter than the oscillation period "
            f"({period:.3g} s); the trend estimate will track individual pulses",
            DDMapWarning, stacklevel=2)
    return x.replace(x.samples - trend.samples)
