"""Lagged predictor construction and greedy informative-lag selection.

Lag selection scores candidates by mutual information with the target
(relevance) minus their average mutual information with already-selected
lags (redundancy), the difference form of the criterion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InputError

#: candidate lags offered to the selector by default: the last day plus the
#: two-day, three-day, and one-week echoes seen in load data.
DEFAULT_LAG_POOL = tuple(range(1, 25)) + (48, 72, 168)
DEFAULT_BINS = 16
DEFAULT_K = 8


@dataclass(frozen=True)
class FeatureMatrix:
    """Aligned (row, target) pairs where every feature predates its target."""

    rows: np.ndarray
    targets: np.ndarray
    lag_labels: tuple
    source: str = "series"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if rows.ndim != 2:
            raise InputError("rows must be a 2-D array")
        if rows.shape[0] != targets.size:
            raise InputError("row count must match target count")
        if rows.shape[1] != len(self.lag_labels):
            raise InputError("row width must match lag label count")
        rows.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.targets.size

    def column(self, lag: int) -> np.ndarray:
        return self.rows[:, self.lag_labels.index(lag)]

    def select(self, lags) -> "FeatureMatrix":
        """Sub-matrix keeping only the given lags (ascending)."""
        keep = sorted(set(lags))
        idx = [self.lag_labels.index(lag) for lag in keep]
        return FeatureMatrix(self.rows[:, idx], self.targets, tuple(keep), self.source)


def build_lag_matrix(x, lags, source: str = "series") -> FeatureMatrix:
    """Rows ``[x[t-lag] for lag ascending]`` for every t from max(lags) on."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    ordered = sorted({int(lag) for lag in lags})
    if not ordered:
        raise InputError("lag set must be non-empty")
    if ordered[0] < 1:
        raise InputError(f"lags must be positive, got {ordered[0]}")
    if ordered[-1] >= n:
        raise InputError(f"lag {ordered[-1]} does not fit a series of length {n}")
    t = np.arange(ordered[-1], n)
    rows = np.column_stack([x[t - lag] for lag in ordered])
    return FeatureMatrix(rows=rows, targets=x[t], lag_labels=tuple(ordered), source=source)


def mutual_information(a, b, bins: int) -> float:
    """Plug-in mutual information (nats) from an equal-width joint histogram.

    A constant input occupies a single bin and contributes zero information
    by convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size != b.size:
        raise InputError("sequences must have equal length")
    if a.size < 2:
        raise InputError("need at least 2 samples")
    if bins < 2:
        raise InputError("bins must be at least 2")
    if a.min() == a.max() or b.min() == b.max():
        return 0.0
    joint, _, _ = np.histogram2d(a, b, bins=bins)
    p = joint / joint.sum()
    marginal = p.sum(axis=1, keepdims=True) @ p.sum(axis=0, keepdims=True).reshape(1, -1)
    occupied = p > 0
    return float(np.sum(p[occupied] * np.log(p[occupied] / marginal[occupied])))


def mrmr_select(fm: FeatureMatrix, k: int, bins: int = DEFAULT_BINS) -> list[int]:
    """Greedy forward selection of ``k`` lags, returned in selection order.

    Relevance is MI with the target; redundancy is the mean MI with already
    selected lags. Ties go to the smaller lag.
    """
    width = len(fm.lag_labels)
    if not 1 <= k <= width:
        raise InputError(f"k must be in 1..{width}, got {k}")
    relevance = np.array(
        [mutual_information(fm.rows[:, j], fm.targets, bins) for j in range(width)]
    )
    pair_mi: dict[tuple[int, int], float] = {}

    def redundancy(j: int, chosen: list[int]) -> float:
        total = 0.0
        for s in chosen:
            key = (min(j, s), max(j, s))
            if key not in pair_mi:
                pair_mi[key] = mutual_information(fm.rows[:, j], fm.rows[:, s], bins)
            total += pair_mi[key]
        return total / len(chosen)

    selected: list[int] = []
    # Scan candidates by ascending lag so ties resolve to the smaller lag
    # regardless of how the columns happen to be ordered.
    remaining = sorted(range(width), key=lambda j: fm.lag_labels[j])
    while len(selected) < k:
        best_j = None
        best_score = -np.inf
        for j in remaining:
            score = relevance[j]
            if selected:
                score -= redundancy(j, selected)
            if score > best_score:
                best_score = score
                best_j = j
        selected.append(best_j)
        remaining.remove(best_j)
    return [fm.lag_labels[j] for j in selected]


def write_selected_lags(path, component: str, lags, relevance, k: int, bins: int) -> None:
    """Selected-lag report: ``{component, lags, relevance, k, bins}``."""
    payload = {
        "component": component,
        "lags": [int(lag) for lag in lags],
        "relevance": [float(r) for r in relevance],
        "k": k,
        "bins": bins,
    }
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
