import numpy as np
import pytest

from ddmap.timeseries import (
    LandmarkSequence,
    PipelineError,
    TimeSeries,
    format_rows,
    read_csv_columns,
    read_timeseries,
    write_timeseries,
)


def test_timeseries_rejects_bad_input():
    with pytest.raises(ValueError):
        TimeSeries([1.0], 10.0)
    with pytest.raises(ValueError):
        TimeSeries([1.0, np.nan], 10.0)
    with pytest.raises(ValueError):
        TimeSeries([1.0, 2.0], 0.0)


def test_timeseries_is_read_only():
    x = TimeSeries(np.arange(4.0), 2.0)
    with pytest.raises(ValueError):
        x.samples[0] = 7.0
    assert x.duration == pytest.approx(2.0)
    np.testing.assert_allclose(x.times, [0, 0.5, 1.0, 1.5])


def test_csv_roundtrip_is_float_exact(tmp_path, rng):
    v = rng.standard_normal(50) * 1e3
    x = TimeSeries(v, 250.0, t0=1.5)
    path = tmp_path / "s.csv"
    write_timeseries(path, x)
    y = read_timeseries(path)
    assert y.fs == 250.0
    assert y.t0 == 1.5
    np.testing.assert_array_equal(y.samples, v)


def test_format_rows_uses_17_digits():
    text = format_rows(["a", "b"], [np.array([0.1]), np.array([3], dtype=np.int64)])
    assert text.splitlines() == ["a,b", "0.10000000000000001,3"]


def test_read_csv_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_csv_columns(empty)
    header_only = tmp_path / "h.csv"
    header_only.write_text("time,value\n")
    with pytest.raises(ValueError, match="no rows"):
        read_csv_columns(header_only)
    ragged = tmp_path / "r.csv"
    ragged.write_text("time,value\n0,1\n1\n")
    with pytest.raises(ValueError, match="expected 2 fields"):
        read_csv_columns(ragged)


def test_landmark_sequence_invariants():
    lm = LandmarkSequence([2, 5, 9], 10.0)
    np.testing.assert_allclose(lm.times, [0.2, 0.5, 0.9])
    with pytest.raises(ValueError):
        LandmarkSequence([3, 3], 10.0)
    with pytest.raises(ValueError):
        LandmarkSequence([-1, 3], 10.0)
    with pytest.raises(ValueError):
        lm.check_bounds(9)


def test_pipeline_error_carries_stage():
    err = PipelineError("embed", "boom")
    assert err.stage == "embed" and "boom" in str(err)
