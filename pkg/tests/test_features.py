"""Lag matrices, histogram mutual information, greedy lag selection."""

import json

import numpy as np
import pytest

from modecast.exceptions import InputError
from modecast.features import (
    FeatureMatrix,
    build_lag_matrix,
    mrmr_select,
    mutual_information,
    write_selected_lags,
)


class TestBuildLagMatrix:
    def test_direct_indexing_example(self):
        fm = build_lag_matrix([1.0, 2.0, 3.0, 4.0], {1, 2})
        np.testing.assert_array_equal(fm.rows, [[2.0, 1.0], [3.0, 2.0]])
        np.testing.assert_array_equal(fm.targets, [3.0, 4.0])
        assert fm.lag_labels == (1, 2)

    def test_lag_exceeding_length(self):
        with pytest.raises(InputError):
            build_lag_matrix([1.0, 2.0, 3.0, 4.0], {5})

    def test_single_lag_persistence(self):
        x = np.random.default_rng(0).normal(size=30)
        fm = build_lag_matrix(x, {1})
        np.testing.assert_array_equal(fm.rows[:, 0], x[:-1])
        np.testing.assert_array_equal(fm.targets, x[1:])

    def test_empty_lag_set(self):
        with pytest.raises(InputError):
            build_lag_matrix([1.0, 2.0, 3.0], set())

    def test_non_positive_lag(self):
        with pytest.raises(InputError):
            build_lag_matrix([1.0, 2.0, 3.0], {0, 1})

    def test_no_temporal_leakage(self):
        # with x = t every feature value is its own timestamp
        x = np.arange(50.0)
        fm = build_lag_matrix(x, {1, 3, 7})
        for row, target in zip(fm.rows, fm.targets):
            assert np.all(row < target)

    def test_shape_validation(self):
        with pytest.raises(InputError):
            FeatureMatrix(np.zeros((3, 2)), np.zeros(4), (1, 2))
        with pytest.raises(InputError):
            FeatureMatrix(np.zeros((3, 2)), np.zeros(3), (1,))


class TestMutualInformation:
    def test_self_information_equals_binned_entropy(self):
        a = np.random.default_rng(1).normal(size=1000)
        counts, _ = np.histogram(a, bins=16)
        p = counts / counts.sum()
        entropy = -np.sum(p[p > 0] * np.log(p[p > 0]))
        assert mutual_information(a, a, 16) == pytest.approx(entropy, abs=1e-12)

    def test_independent_uniforms_near_zero(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(size=10000)
        b = rng.uniform(size=10000)
        assert mutual_information(a, b, 8) <= 0.02

    def test_negation_is_relabeling(self):
        a = np.random.default_rng(2).normal(size=500)
        assert mutual_information(a, -a, 16) == pytest.approx(
            mutual_information(a, a, 16), abs=1e-12
        )

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=400)
        b = a + rng.normal(size=400)
        assert mutual_information(a, b, 12) == pytest.approx(
            mutual_information(b, a, 12), abs=1e-12
        )

    def test_constant_input_is_zero_by_convention(self):
        a = np.full(100, 3.0)
        b = np.random.default_rng(0).normal(size=100)
        assert mutual_information(a, b, 8) == 0.0

    def test_validation(self):
        with pytest.raises(InputError):
            mutual_information([1.0], [2.0], 8)
        with pytest.raises(InputError):
            mutual_information([1.0, 2.0], [1.0, 2.0, 3.0], 8)
        with pytest.raises(InputError):
            mutual_information([1.0, 2.0], [1.0, 2.0], 1)


def _greedy_oracle(fm, k, bins):
    """Exhaustive recomputation of the greedy criterion at every step."""
    width = len(fm.lag_labels)
    relevance = [mutual_information(fm.rows[:, j], fm.targets, bins) for j in range(width)]
    chosen = []
    while len(chosen) < k:
        best, best_score = None, -np.inf
        for j in sorted(range(width), key=lambda c: fm.lag_labels[c]):
            if j in chosen:
                continue
            score = relevance[j]
            if chosen:
                score -= sum(
                    mutual_information(fm.rows[:, j], fm.rows[:, s], bins) for s in chosen
                ) / len(chosen)
            if score > best_score:
                best, best_score = j, score
        chosen.append(best)
    return [fm.lag_labels[j] for j in chosen]


class TestMrmrSelect:
    def _matrix(self):
        rng = np.random.default_rng(8)
        n = 600
        driver = rng.normal(size=n)
        cols = np.column_stack([
            driver,                       # lag 1: the true predictor
            rng.normal(size=n),           # lag 2: noise
            driver + 0.05 * rng.normal(size=n),  # lag 3: near-duplicate of lag 1
            rng.normal(size=n),           # lag 4: noise
        ])
        target = driver + 0.1 * rng.normal(size=n)
        return FeatureMatrix(cols, target, (1, 2, 3, 4))

    def test_k1_is_pure_max_relevance(self):
        fm = self._matrix()
        [picked] = mrmr_select(fm, 1, bins=16)
        relevances = {
            lag: mutual_information(fm.column(lag), fm.targets, 16)
            for lag in fm.lag_labels
        }
        assert picked == max(fm.lag_labels, key=lambda lag: relevances[lag])

    def test_exact_copy_selected_first(self):
        rng = np.random.default_rng(9)
        cols = rng.normal(size=(400, 3))
        target = cols[:, 1].copy()
        fm = FeatureMatrix(cols, target, (1, 2, 3))
        assert mrmr_select(fm, 2, bins=16)[0] == 2

    def test_matches_bruteforce_oracle_with_duplicate_column(self):
        rng = np.random.default_rng(10)
        driver = rng.normal(size=500)
        cols = np.column_stack([driver, driver.copy(), rng.normal(size=500),
                                0.7 * driver + rng.normal(size=500)])
        fm = FeatureMatrix(cols, driver + 0.2 * rng.normal(size=500), (1, 2, 3, 4))
        for k in (1, 2, 3, 4):
            assert mrmr_select(fm, k, bins=16) == _greedy_oracle(fm, k, 16)

    def test_deterministic(self):
        fm = self._matrix()
        assert mrmr_select(fm, 3, bins=16) == mrmr_select(fm, 3, bins=16)

    def test_column_permutation_invariance(self):
        fm = self._matrix()
        perm = [2, 0, 3, 1]
        shuffled = FeatureMatrix(
            fm.rows[:, perm], fm.targets, tuple(fm.lag_labels[j] for j in perm)
        )
        assert mrmr_select(shuffled, 3, bins=16) == mrmr_select(fm, 3, bins=16)

    def test_tie_break_prefers_smaller_lag(self):
        col = np.random.default_rng(11).normal(size=300)
        fm = FeatureMatrix(np.column_stack([col, col]), col.copy(), (4, 9))
        assert mrmr_select(fm, 1, bins=16)[0] == 4

    def test_k_out_of_range(self):
        fm = self._matrix()
        with pytest.raises(InputError):
            mrmr_select(fm, 0)
        with pytest.raises(InputError):
            mrmr_select(fm, 5)


def test_selected_lag_report(tmp_path):
    path = tmp_path / "lags.json"
    write_selected_lags(path, "imf3", [1, 2, 24], [0.9, 0.5, 0.3], k=3, bins=16)
    payload = json.loads(path.read_text())
    assert payload == {
        "component": "imf3",
        "lags": [1, 2, 24],
        "relevance": [0.9, 0.5, 0.3],
        "k": 3,
        "bins": 16,
    }
