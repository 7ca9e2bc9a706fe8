"""Extrema, boundary extension, envelopes, sifting, and the decomposition."""

import math

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from modecast.emd import (
    BoundaryPolicy,
    Decomposition,
    ExtremaSet,
    SiftConfig,
    _natural_spline_grid,
    decompose,
    emd,
    envelope,
    envelopes,
    extend_extrema,
    extract_imf,
    find_extrema,
    is_monotone,
    reconstruct,
    sift_once,
    write_decomposition_csv,
    zero_crossings,
)
from modecast.exceptions import InputError, MonotoneInputError, SeriesTooShortError
from modecast.series import TimeSeries, load_preset, wind_preset


def _two_tone(n=1000, fast=10.0, slow=100.0):
    t = np.arange(n)
    return np.sin(2 * np.pi * t / fast) + np.sin(2 * np.pi * t / slow)


class TestFindExtrema:
    def test_single_peak(self):
        ext = find_extrema([0.0, 1.0, 0.0])
        np.testing.assert_array_equal(ext.max_positions, [1.0])
        assert ext.min_positions.size == 0

    def test_monotone_has_none(self):
        assert find_extrema([1.0, 2.0, 3.0, 4.0]).count == 0

    def test_plateau_center_rounded_down(self):
        ext = find_extrema([0.0, 1.0, 1.0, 0.0])
        np.testing.assert_array_equal(ext.max_positions, [1.0])

    def test_plateau_rounding_on_longer_run(self):
        # plateau over samples 1..3 -> center (1+3)//2 = 2
        ext = find_extrema([0.0, 1.0, 1.0, 1.0, 0.0])
        np.testing.assert_array_equal(ext.max_positions, [2.0])

    def test_boundary_plateau_ignored(self):
        assert find_extrema([1.0, 1.0, 0.0, 2.0]).max_positions.size == 0

    def test_minima_and_alternation(self):
        x = np.sin(2 * np.pi * np.arange(100) / 20.0)
        ext = find_extrema(x)
        assert ext.max_positions.size == 5
        assert ext.min_positions.size == 5
        merged = np.sort(np.concatenate([ext.max_positions, ext.min_positions]))
        assert np.all(np.diff(merged) > 0)

    def test_too_short(self):
        with pytest.raises(SeriesTooShortError):
            find_extrema([1.0, 2.0])


class TestExtendExtrema:
    def test_linear_right_continuation(self):
        # maxima line through (10, 2) and (20, 3) continues to (30, 4)
        ext = ExtremaSet(
            max_positions=np.array([10.0, 20.0]),
            max_values=np.array([2.0, 3.0]),
            min_positions=np.array([15.0]),
            min_values=np.array([-1.0]),
        )
        out = extend_extrema(ext, np.zeros(25), BoundaryPolicy.LINEAR_EXTRAPOLATION)
        assert out.includes_synthetic_endpoints
        assert out.max_positions[-1] == 30.0
        assert out.max_values[-1] == pytest.approx(4.0, abs=1e-12)
        assert out.max_positions[0] == 0.0  # left extension, one gap out
        assert out.max_values[0] == pytest.approx(1.0, abs=1e-12)

    def test_linear_pushes_out_when_gap_is_short(self):
        # last maxima at 4, 8 with N=25: 8+4 < 24, so the anchor moves to 24+4
        ext = ExtremaSet(
            max_positions=np.array([4.0, 8.0]),
            max_values=np.array([1.0, 2.0]),
            min_positions=np.array([6.0]),
            min_values=np.array([0.0]),
        )
        out = extend_extrema(ext, np.zeros(25), BoundaryPolicy.LINEAR_EXTRAPOLATION)
        assert out.max_positions[-1] == 28.0

    def test_mirror_reflection(self):
        ext = ExtremaSet(
            max_positions=np.array([3.0]),
            max_values=np.array([5.0]),
            min_positions=np.array([7.0]),
            min_values=np.array([-2.0]),
        )
        out = extend_extrema(ext, np.zeros(11), BoundaryPolicy.MIRROR_REFLECTION)
        assert out.max_positions[0] == -3.0
        assert out.max_values[0] == 5.0
        assert out.min_positions[-1] == 2 * 10 - 7
        assert out.min_values[-1] == -2.0

    def test_clamp_endpoints(self):
        x = np.array([4.0, 1.0, 6.0, 1.0, 3.0])
        out = extend_extrema(find_extrema(x), x, BoundaryPolicy.CLAMP_ENDPOINTS)
        assert out.max_positions[0] == 0.0 and out.max_values[0] == 4.0
        assert out.min_positions[-1] == 4.0 and out.min_values[-1] == 3.0

    def test_no_extrema_signals_monotone(self):
        x = np.arange(6.0)
        with pytest.raises(MonotoneInputError):
            extend_extrema(find_extrema(x), x, BoundaryPolicy.LINEAR_EXTRAPOLATION)

    def test_sinusoid_boundary_envelope_within_5pct(self):
        # analytic upper envelope of a unit sinusoid is +1
        x = np.sin(2 * np.pi * np.arange(500) / 50.0)
        pair = envelopes(x, SiftConfig(boundary_policy=BoundaryPolicy.LINEAR_EXTRAPOLATION))
        assert abs(pair.upper[-1] - 1.0) <= 0.05
        assert abs(pair.lower[-1] + 1.0) <= 0.05


class TestEnvelope:
    def test_two_equal_points_give_constant(self):
        env = envelope([0.0, 10.0], [1.0, 1.0], 11)
        np.testing.assert_allclose(env, 1.0, atol=1e-15)

    def test_three_point_symmetry(self):
        env = envelope([0.0, 5.0, 10.0], [0.0, 5.0, 0.0], 11)
        assert env[5] == pytest.approx(5.0, abs=1e-12)
        np.testing.assert_allclose(env, env[::-1], atol=1e-12)

    def test_single_point_rejected(self):
        with pytest.raises(InputError):
            envelope([3.0], [1.0], 10)

    def test_sine_upper_envelope_tracks_amplitude(self):
        x = np.sin(2 * np.pi * np.arange(500) / 50.0)
        pair = envelopes(x)
        interior = pair.upper[25:475]
        assert np.max(np.abs(interior - 1.0)) <= 0.02

    def test_matches_reference_natural_spline(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            k = int(rng.integers(3, 30))
            xs = np.concatenate([[-3.0], np.sort(rng.uniform(0, 95, k)), [101.0]])
            ys = rng.normal(0, 2, k + 2)
            mine = _natural_spline_grid(xs, ys, 100)
            ref = CubicSpline(xs, ys, bc_type="natural")(np.arange(100.0))
            np.testing.assert_allclose(mine, ref, atol=1e-10)


class TestSiftOnce:
    def test_symmetric_envelopes_leave_signal_unchanged(self):
        # exact +/-1 peaks: both envelopes are flat, mean envelope is zero
        x = np.tile([0.0, 1.0, 0.0, -1.0], 100)
        h, mean_env = sift_once(x)
        assert np.max(np.abs(mean_env)) <= 1e-12
        np.testing.assert_allclose(h, x, atol=1e-12)

    def test_recovers_constant_offset(self):
        x = 2.0 + np.sin(2 * np.pi * np.arange(400) / 20.0)
        h, mean_env = sift_once(x)
        interior = slice(40, 360)
        assert np.max(np.abs(mean_env[interior] - 2.0)) <= 0.05
        assert np.max(np.abs(h[interior] - (x[interior] - mean_env[interior]))) == 0.0

    def test_monotone_input_signals(self):
        with pytest.raises(MonotoneInputError):
            sift_once(np.arange(50.0))


class TestExtractImf:
    def test_pure_tone_converges_fast(self):
        x = np.sin(2 * np.pi * np.arange(400) / 20.0)
        imf, iterations = extract_imf(x)
        assert iterations <= 3
        interior = slice(20, 380)
        corr = np.corrcoef(imf[interior], x[interior])[0, 1]
        assert corr >= 0.99

    def test_huge_epsilon_stops_after_one_iteration(self):
        x = _two_tone(300)
        imf, iterations = extract_imf(x, SiftConfig(epsilon=1e9))
        assert iterations == 1
        first_h, _ = sift_once(x)
        np.testing.assert_array_equal(imf, first_h)

    def test_iteration_cap_of_one(self):
        x = _two_tone(300)
        imf, iterations = extract_imf(x, SiftConfig(max_sift_iterations=1))
        assert iterations == 1
        np.testing.assert_array_equal(imf, sift_once(x)[0])

    def test_stop_criterion_holds_on_returned_imf(self):
        x = _two_tone(600)
        config = SiftConfig(epsilon=1e-3, max_sift_iterations=30)
        imf, iterations = extract_imf(x, config)
        assert iterations < config.max_sift_iterations
        _, mean_env = sift_once(imf, config)
        assert np.max(np.abs(mean_env)) <= config.epsilon

    def test_mean_stop_norm_variant(self):
        x = _two_tone(600)
        imf, _ = extract_imf(x, SiftConfig(epsilon=1e-3, stop_norm="mean",
                                           max_sift_iterations=30))
        assert np.isfinite(imf).all()


class TestDecompose:
    def test_monotone_ramp_yields_no_modes(self):
        x = np.linspace(0.0, 5.0, 64)
        d = decompose(x)
        assert len(d.imfs) == 0
        np.testing.assert_array_equal(d.residual, x)

    def test_two_tone_separation(self):
        t = np.arange(1000)
        fast = np.sin(2 * np.pi * t / 10.0)
        slow = np.sin(2 * np.pi * t / 100.0)
        d = decompose(fast + slow)
        interior = slice(50, 950)
        assert np.corrcoef(d.imfs[0][interior], fast[interior])[0, 1] >= 0.95
        assert np.corrcoef(d.imfs[1][interior], slow[interior])[0, 1] >= 0.90

    def test_reconstruction_identity(self):
        for seed in range(5):
            x = wind_preset(512, seed).values
            d = decompose(x)
            err = np.max(np.abs(reconstruct(d) - x))
            assert err <= 1e-9 * np.max(np.abs(x))

    def test_mode_count_cap(self):
        for seed in range(5):
            x = wind_preset(600, seed).values
            assert len(decompose(x).imfs) <= math.floor(math.log2(600))

    def test_explicit_cap_clamped_to_log2(self):
        x = wind_preset(256, 3).values
        d = decompose(x, SiftConfig(max_imfs=99))
        assert len(d.imfs) <= 8

    def test_frequency_ordering_on_two_tone(self):
        d = decompose(_two_tone(1000))
        crossings = [zero_crossings(imf) for imf in d.imfs]
        assert all(a >= b for a, b in zip(crossings, crossings[1:]))

    def test_deterministic(self):
        x = load_preset(400, 5).values
        first = decompose(x)
        second = decompose(x)
        for a, b in zip(first.components(), second.components()):
            np.testing.assert_array_equal(a, b)

    def test_too_short(self):
        with pytest.raises(SeriesTooShortError):
            decompose(np.sin(np.arange(7.0)))

    def test_time_series_entry_point(self):
        ts = TimeSeries(_two_tone(256))
        d = emd(ts)
        assert d.method == "EMD"
        assert d.length == 256


class TestReconstruct:
    def test_ramp_roundtrip(self):
        x = np.linspace(0.0, 5.0, 64)
        d = decompose(x)
        np.testing.assert_array_equal(reconstruct(d), d.residual)

    def test_component_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            Decomposition(imfs=(np.zeros(5),), residual=np.zeros(6),
                          method="EMD", config=SiftConfig())

    def test_mode_count_cap_enforced_at_construction(self):
        with pytest.raises(InputError):
            Decomposition(imfs=tuple(np.zeros(16) for _ in range(5)),
                          residual=np.zeros(16), method="EMD", config=SiftConfig())


def test_is_monotone_non_strict():
    assert is_monotone([1.0, 1.0, 2.0])
    assert is_monotone([3.0, 2.0, 2.0])
    assert not is_monotone([1.0, 2.0, 1.0])


def test_sift_config_validation():
    with pytest.raises(InputError):
        SiftConfig(epsilon=0.0)
    with pytest.raises(InputError):
        SiftConfig(max_sift_iterations=0)
    with pytest.raises(InputError):
        SiftConfig(stop_norm="median")


def test_decomposition_csv_export(tmp_path):
    ts = TimeSeries(_two_tone(64))
    d = emd(ts)
    path = tmp_path / "d.csv"
    write_decomposition_csv(path, ts, d)
    lines = path.read_text().splitlines()
    assert lines[0] == "timestamp," + ",".join(
        f"imf{i + 1}" for i in range(len(d.imfs))
    ) + ",residual"
    assert len(lines) == 65
    first = lines[1].split(",")
    total = sum(float(v) for v in first[1:])
    assert total == pytest.approx(ts.values[0], abs=1e-9)
