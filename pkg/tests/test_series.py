"""Series container, CSV round-trip, scaling, splitting, synthesis."""

import numpy as np
import pytest

from modecast.exceptions import CsvFormatError, DegenerateInputError, InputError
from modecast.series import (
    ScaleParams,
    SynthSpec,
    TimeSeries,
    denormalize,
    load_csv,
    load_preset,
    normalize,
    save_csv,
    synth_generate,
    train_test_split,
    wind_preset,
)


def _write(tmp_path, text):
    path = tmp_path / "series.csv"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_well_formed_rows(self, tmp_path):
        path = _write(
            tmp_path,
            "timestamp,value\n"
            "2019-03-30T00:00:00Z,1.0\n"
            "2019-03-30T01:00:00Z,2.0\n"
            "2019-03-30T02:00:00Z,3.0\n",
        )
        ts = load_csv(path)
        assert len(ts) == 3
        np.testing.assert_array_equal(ts.values, [1.0, 2.0, 3.0])

    def test_non_numeric_value_names_line(self, tmp_path):
        path = _write(tmp_path, "timestamp,value\n2019-03-30T00:00:00Z,abc\n")
        with pytest.raises(CsvFormatError) as err:
            load_csv(path)
        assert err.value.line == 2
        assert "abc" in str(err.value)

    def test_timestamp_gap(self, tmp_path):
        path = _write(
            tmp_path,
            "timestamp,value\n"
            "2019-03-30T00:00:00Z,1.0\n"
            "2019-03-30T02:00:00Z,2.0\n",
        )
        with pytest.raises(CsvFormatError, match="gap"):
            load_csv(path)

    def test_timestamp_disorder(self, tmp_path):
        path = _write(
            tmp_path,
            "timestamp,value\n"
            "2019-03-30T05:00:00Z,1.0\n"
            "2019-03-30T04:00:00Z,2.0\n",
        )
        with pytest.raises(CsvFormatError, match="disorder"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CsvFormatError, match="no such file"):
            load_csv(tmp_path / "absent.csv")

    def test_malformed_row(self, tmp_path):
        path = _write(tmp_path, "timestamp,value\n2019-03-30T00:00:00Z,1.0,extra\n")
        with pytest.raises(CsvFormatError) as err:
            load_csv(path)
        assert err.value.line == 2

    def test_write_read_identity(self, tmp_path):
        ts = wind_preset(300, seed=9)
        path = tmp_path / "rt.csv"
        save_csv(ts, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.values, ts.values)
        assert back.start_time == ts.start_time


class TestNormalize:
    def test_affine_endpoints(self):
        ts = TimeSeries([2.0, 4.0, 6.0])
        scaled, params = normalize(ts, -1.0, 1.0)
        np.testing.assert_allclose(scaled.values, [-1.0, 0.0, 1.0], atol=0)
        assert params.observed_min == 2.0 and params.observed_max == 6.0

    def test_constant_series_rejected(self):
        with pytest.raises(DegenerateInputError):
            normalize(TimeSeries([5.0, 5.0, 5.0]))

    def test_bounds_attained_exactly(self):
        rng = np.random.default_rng(0)
        ts = TimeSeries(rng.normal(30.0, 7.0, size=200))
        scaled, _ = normalize(ts, -1.0, 1.0)
        assert scaled.values.min() == -1.0
        assert scaled.values.max() == 1.0

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            ts = TimeSeries(rng.normal(0.0, 50.0, size=64))
            scaled, params = normalize(ts)
            back = denormalize(scaled, params)
            span = ts.values.max() - ts.values.min()
            assert np.max(np.abs(back.values - ts.values)) <= 1e-12 * span


class TestDenormalize:
    def test_affine_inverse(self):
        restored = denormalize(TimeSeries([-1.0, 0.0, 1.0]), ScaleParams(2.0, 6.0))
        np.testing.assert_allclose(restored.values, [2.0, 4.0, 6.0], atol=0)

    def test_identity_params(self):
        ts = TimeSeries([3.0, 7.0, 5.0])
        same = denormalize(ts, ScaleParams(3.0, 7.0, target_low=3.0, target_high=7.0))
        np.testing.assert_array_equal(same.values, ts.values)

    def test_invalid_params(self):
        with pytest.raises(DegenerateInputError):
            ScaleParams(5.0, 5.0)
        with pytest.raises(InputError):
            ScaleParams(0.0, 1.0, target_low=1.0, target_high=-1.0)


class TestSynthGenerate:
    def test_pure_sinusoid_closed_form(self):
        spec = SynthSpec(length=96, sinusoids=[(1.0, 24.0, 0.0)], seed=0)
        ts = synth_generate(spec)
        expected = np.sin(2 * np.pi * np.arange(96) / 24.0)
        assert np.max(np.abs(ts.values - expected)) <= 1e-12

    def test_deterministic(self):
        spec = SynthSpec(length=200, sinusoids=[(2.0, 12.0, 0.4)],
                         ar1_coefficient=0.5, noise_std=1.0, seed=77)
        np.testing.assert_array_equal(synth_generate(spec).values,
                                      synth_generate(spec).values)

    def test_ar1_lag_one_autocorrelation(self):
        # noise-only spec: values are exactly the AR(1) process
        spec = SynthSpec(length=5000, ar1_coefficient=0.8, noise_std=1.0, seed=42)
        e = synth_generate(spec).values
        r1 = np.corrcoef(e[:-1], e[1:])[0, 1]
        assert abs(r1 - 0.8) <= 0.05

    def test_invalid_spec(self):
        with pytest.raises(InputError):
            SynthSpec(length=1)
        with pytest.raises(InputError):
            SynthSpec(length=10, noise_std=-1.0)
        with pytest.raises(InputError):
            SynthSpec(length=10, ar1_coefficient=1.0)

    def test_presets(self):
        load = load_preset(500, seed=1)
        wind = wind_preset(500, seed=1)
        assert np.all(load.values > 0)
        assert np.all(wind.values >= 0.0)
        # occasional zero-clipping is the wind preset's signature
        assert np.any(wind.values == 0.0)


class TestTrainTestSplit:
    @pytest.mark.parametrize("n,fraction,expected", [(10, 0.8, (8, 2)), (100, 0.8, (80, 20))])
    def test_floor_rule(self, n, fraction, expected):
        ts = TimeSeries(np.arange(n, dtype=float) + 1.0)
        train, test = train_test_split(ts, fraction)
        assert (len(train), len(test)) == expected

    @pytest.mark.parametrize("fraction", [1.0, 0.0, -0.5, 1.5])
    def test_out_of_range_fraction(self, fraction):
        with pytest.raises(InputError):
            train_test_split(TimeSeries(np.arange(10.0) + 1), fraction)

    def test_empty_part(self):
        with pytest.raises(InputError):
            train_test_split(TimeSeries([1.0, 2.0]), 0.1)

    def test_concatenation_restores_series(self):
        ts = TimeSeries(np.random.default_rng(3).normal(size=57))
        train, test = train_test_split(ts, 0.8)
        np.testing.assert_array_equal(np.concatenate([train.values, test.values]), ts.values)
        assert test.start_time == train.start_time + len(train) * train.step


def test_values_are_immutable():
    ts = TimeSeries([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ts.values[0] = 9.0


def test_non_finite_rejected():
    with pytest.raises(InputError, match="index 1"):
        TimeSeries([1.0, np.nan, 2.0])
