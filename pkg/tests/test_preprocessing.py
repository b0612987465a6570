import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ddmap.cycles import detect_landmarks
from ddmap.preprocessing import (
    butterworth_lowpass_bidirectional,
    detrend_median,
    fourier_upsample,
    median_filter,
    ms_to_samples,
    remove_baseline_two_step,
)
from ddmap.scenarios import ecg_flat
from ddmap.timeseries import DDMapWarning, TimeSeries


def _sines(fs, n, *components):
    t = np.arange(n) / fs
    return TimeSeries(sum(a * np.sin(2 * np.pi * f * t) for f, a in components), fs)


def _amp_at(v, fs, f):
    mag = np.abs(np.fft.rfft(v)) * 2 / v.size
    return mag[int(round(f * v.size / fs))]


def test_ms_to_samples_rounds_half_up_and_forces_odd():
    assert ms_to_samples(200, 200) == 40
    assert ms_to_samples(200, 200, odd=True) == 41
    assert ms_to_samples(12.5, 200) == 3
    assert ms_to_samples(7.5, 200) == 2


# -- lowpass ----------------------------------------------------------------------

def test_lowpass_dc_gain():
    y = butterworth_lowpass_bidirectional(TimeSeries(np.ones(500), 200.0))
    np.testing.assert_allclose(y.samples, 1.0, atol=1e-9)


def test_lowpass_attenuates_80hz_and_keeps_1hz():
    x = _sines(200.0, 2000, (1.0, 1.0), (80.0, 1.0))
    y = butterworth_lowpass_bidirectional(x, 3, 40.0).samples
    inner = slice(200, 1800)
    a80 = _amp_at(y[inner], 200.0, 80.0)
    a1 = _amp_at(y[inner], 200.0, 1.0)
    assert 20 * np.log10(a80) <= -30
    assert a1 == pytest.approx(1.0, rel=0.01)


def test_lowpass_zero_phase_on_symmetric_pulse():
    n = 401
    t = np.arange(n) - 200
    x = TimeSeries(np.exp(-0.5 * (t / 6.0) ** 2), 200.0)
    y = butterworth_lowpass_bidirectional(x).samples
    assert np.argmax(y) == 200
    assert np.max(np.abs(y - y[::-1])) <= 1e-6


def test_lowpass_idempotent_in_passband():
    x = _sines(200.0, 4000, (1.0, 1.0))
    once = butterworth_lowpass_bidirectional(x)
    twice = butterworth_lowpass_bidirectional(once)
    inner = slice(400, 3600)
    assert abs(_amp_at(twice.samples[inner], 200, 1) / _amp_at(once.samples[inner], 200, 1) - 1) < 0.02


def test_lowpass_preconditions():
    x = TimeSeries(np.zeros(100), 200.0)
    with pytest.raises(ValueError, match="Nyquist"):
        butterworth_lowpass_bidirectional(x, 3, 100.0)
    with pytest.raises(ValueError):
        butterworth_lowpass_bidirectional(x, 0, 40.0)


# -- median filters -------------------------------------------------------------------

def _brute_median(v, w):
    h = w // 2
    return np.array([np.median(v[max(0, i - h):i + h + 1]) for i in range(v.size)])


def test_median_constant_and_spike():
    c = TimeSeries(np.full(50, 3.5), 1000.0)
    np.testing.assert_array_equal(median_filter(c, 5).samples, c.samples)
    v = np.zeros(21)
    v[10] = 10.0
    y = median_filter(TimeSeries(v, 1000.0), 5).samples
    assert y[10] == 0.0


def test_median_step_no_overshoot():
    v = np.r_[np.zeros(10), np.ones(10)]
    y = median_filter(TimeSeries(v, 1000.0), 3).samples
    np.testing.assert_array_equal(y, _brute_median(v, 3))
    np.testing.assert_array_equal(y, v)


@given(arrays(np.float64, st.integers(12, 60), elements=st.floats(-1e3, 1e3)), st.sampled_from([3, 5, 7, 11]))
def test_median_matches_truncated_brute_force(v, w):
    y = median_filter(TimeSeries(v, 1000.0), w).samples
    np.testing.assert_array_equal(y, _brute_median(v, w))


@given(arrays(np.float64, st.integers(12, 60), elements=st.floats(-100, 100)),
       st.floats(-1e3, 1e3).filter(lambda c: c == round(c)))
def test_median_commutes_with_constants(v, c):
    # integer shifts keep float arithmetic exact
    v = np.round(v)
    a = median_filter(TimeSeries(v + c, 1000.0), 5).samples
    b = median_filter(TimeSeries(v, 1000.0), 5).samples + c
    np.testing.assert_array_equal(a, b)


def test_median_errors():
    x = TimeSeries(np.zeros(10), 100.0)
    with pytest.raises(ValueError, match="shorter than 3"):
        median_filter(x, 10)
    with pytest.raises(ValueError, match="longer than the signal"):
        median_filter(x, 500)


# -- baseline removal ------------------------------------------------------------------

def test_two_step_baseline_reduces_slow_wave():
    x = _sines(200.0, 200 * 60, (0.2, 5.0))
    y = remove_baseline_two_step(x)
    rms = lambda v: np.sqrt(np.mean(v ** 2))  # noqa: E731
    assert rms(y.samples) <= 0.1 * rms(x.samples)


def test_two_step_baseline_constant_offset():
    y = remove_baseline_two_step(TimeSeries(np.full(1000, 2.75), 200.0))
    assert np.max(np.abs(y.samples)) <= 1e-9


def test_two_step_baseline_keeps_r_peaks():
    ds = ecg_flat(seed=5, n_cycles=60)
    x = ds.signal
    y = remove_baseline_two_step(x)
    a = detect_landmarks(x).indices
    b = detect_landmarks(y).indices
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(b, ds.true_landmarks.indices)


def test_lengths_preserved():
    x = _sines(200.0, 1234, (1.0, 1.0))
    for y in (butterworth_lowpass_bidirectional(x), median_filter(x, 200), remove_baseline_two_step(x),
              detrend_median(x, 2.0, period_s=1.0)):
        assert len(y) == len(x)
    assert len(fourier_upsample(x, 400.0)) == 2 * len(x)


# -- Fourier upsampling ------------------------------------------------------------------

@pytest.mark.parametrize("n", [1250, 1251])
def test_upsample_exact_on_band_limited(n):
    fs, target = 125.0, 2000.0
    x = _sines(fs, n, (1.0, 1.0))
    y = fourier_upsample(x, target)
    assert y.fs == target
    t = np.arange(len(y)) / target
    if n == 1250:
        # integer number of periods: the interpolant is the sinusoid itself
        assert np.max(np.abs(y.samples - np.sin(2 * np.pi * t))) <= 1e-9
    np.testing.assert_allclose(y.samples[::16], x.samples, atol=1e-9)


@pytest.mark.parametrize("n", [512, 513])
def test_upsample_preserves_energy(rng, n):
    x = TimeSeries(rng.standard_normal(n), 125.0)
    y = fourier_upsample(x, 500.0)
    e0 = np.sum(x.samples ** 2) / x.fs
    e1 = np.sum(y.samples ** 2) / y.fs
    assert abs(e1 - e0) / e0 <= 1e-6
    np.testing.assert_allclose(y.samples[::4], x.samples, atol=1e-9)


def test_upsample_preconditions():
    x = TimeSeries(np.zeros(10), 100.0)
    with pytest.raises(ValueError):
        fourier_upsample(x, 100.0)
    with pytest.raises(ValueError, match="integer"):
        fourier_upsample(x, 133.0)


# -- detrending ----------------------------------------------------------------------------

def test_detrend_removes_ramp():
    fs = 125.0
    t = np.arange(int(60 * fs)) / fs
    pulses = np.maximum(0, np.sin(2 * np.pi * 1.2 * t)) ** 3
    ramp = 0.5 * t
    y = detrend_median(TimeSeries(ramp + pulses, fs), 2.0).samples
    slope_in = np.polyfit(t, ramp + pulses, 1)[0]
    slope_out = np.polyfit(t, y, 1)[0]
    assert abs(slope_out) <= 0.01 * abs(slope_in)


def test_detrend_zero_signal():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        y = detrend_median(TimeSeries(np.zeros(500), 100.0), 2.0)
    np.testing.assert_array_equal(y.samples, 0.0)


def test_detrend_short_window_warns():
    x = _sines(100.0, 3000, (0.5, 1.0))
    with pytest.warns(DDMapWarning, match="shorter than the oscillation period"):
        detrend_median(x, 1.0)
