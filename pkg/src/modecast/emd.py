"""Empirical mode decomposition: extrema, boundary extension, envelopes, sifting.

The decomposition repeatedly subtracts the average of cubic-spline envelopes
until each extracted component has a near-zero local mean, then peels it off
and continues on the remainder until that remainder is monotone or the mode
budget ``floor(log2 N)`` is exhausted.

Boundary handling is explicit because it is the part that matters in real
time: envelopes near the series ends depend on extrema that have not been
observed yet, and the three policies here (linear extrapolation, mirror
reflection, endpoint clamping) are different guesses about them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from numba import njit

from .exceptions import InputError, MonotoneInputError, SeriesTooShortError
from .series import TimeSeries, _TS_FORMAT


@njit(cache=True)
def _natural_spline_grid(xs, ys, n):
    """Natural cubic spline through (xs, ys), sampled at 0..n-1.

    Thomas solve of the tridiagonal second-derivative system with zero end
    curvature; requires at least 3 strictly increasing knots covering the
    evaluation range.
    """
    k = xs.size
    h = xs[1:] - xs[:-1]
    # Second derivatives at the knots (m[0] = m[k-1] = 0).
    m = np.zeros(k)
    if k > 2:
        diag = np.empty(k - 2)
        rhs = np.empty(k - 2)
        sub = np.empty(k - 2)
        sup = np.empty(k - 2)
        for i in range(1, k - 1):
            diag[i - 1] = 2.0 * (h[i - 1] + h[i])
            rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1])
            sub[i - 1] = h[i - 1]
            sup[i - 1] = h[i]
        for i in range(1, k - 2):
            w = sub[i] / diag[i - 1]
            diag[i] -= w * sup[i - 1]
            rhs[i] -= w * rhs[i - 1]
        m[k - 2] = rhs[k - 3] / diag[k - 3]
        for i in range(k - 4, -1, -1):
            m[i + 1] = (rhs[i] - sup[i] * m[i + 2]) / diag[i]

    out = np.empty(n)
    seg = 0
    for t in range(n):
        tt = float(t)
        while seg < k - 2 and tt > xs[seg + 1]:
            seg += 1
        hs = h[seg]
        a = xs[seg + 1] - tt
        b = tt - xs[seg]
        out[t] = (
            m[seg] * a * a * a / (6.0 * hs)
            + m[seg + 1] * b * b * b / (6.0 * hs)
            + (ys[seg] / hs - m[seg] * hs / 6.0) * a
            + (ys[seg + 1] / hs - m[seg + 1] * hs / 6.0) * b
        )
    return out


class BoundaryPolicy(Enum):
    LINEAR_EXTRAPOLATION = "linear"
    MIRROR_REFLECTION = "mirror"
    CLAMP_ENDPOINTS = "clamp"


@dataclass(frozen=True)
class ExtremaSet:
    """Positions and values of local maxima/minima, each list position-sorted.

    Interior extrema sit at integer sample indices; synthetic boundary points
    added by :func:`extend_extrema` may fall outside ``[0, N-1]``.
    """

    max_positions: np.ndarray
    max_values: np.ndarray
    min_positions: np.ndarray
    min_values: np.ndarray
    includes_synthetic_endpoints: bool = False

    def __post_init__(self):
        for pos in (self.max_positions, self.min_positions):
            if pos.size > 1 and not np.all(np.diff(pos) > 0):
                raise InputError("extrema positions must be strictly increasing")

    @property
    def count(self) -> int:
        return int(self.max_positions.size + self.min_positions.size)


@dataclass(frozen=True)
class EnvelopePair:
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class SiftConfig:
    """Knobs for the sifting loop.

    ``epsilon=None`` resolves to ``1e-4 * std(input)`` at decomposition time;
    ``max_imfs=None`` resolves to ``floor(log2 N)``, which is also a hard cap
    on explicit values. ``stop_norm`` selects how the mean envelope is
    reduced for the stop test: ``"max"`` (default) or ``"mean"`` absolute.
    """

    epsilon: float | None = None
    max_sift_iterations: int = 10
    max_imfs: int | None = None
    boundary_policy: BoundaryPolicy = BoundaryPolicy.LINEAR_EXTRAPOLATION
    stop_norm: str = "max"

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.max_sift_iterations < 1:
            raise InputError("max_sift_iterations must be at least 1")
        if self.max_imfs is not None and self.max_imfs < 1:
            raise InputError("max_imfs must be at least 1")
        if self.stop_norm not in ("max", "mean"):
            raise InputError(f"stop_norm must be 'max' or 'mean', got {self.stop_norm!r}")


@dataclass(frozen=True)
class Decomposition:
    """Ordered oscillatory components plus the final residual.

    ``config`` snapshots whatever configuration produced the result (a
    :class:`SiftConfig` for plain runs, an ensemble config for the
    noise-assisted variants).
    """

    imfs: tuple
    residual: np.ndarray
    method: str
    config: object

    def __post_init__(self):
        imfs = tuple(np.asarray(c, dtype=np.float64) for c in self.imfs)
        residual = np.asarray(self.residual, dtype=np.float64)
        n = residual.size
        for c in imfs:
            if c.size != n:
                raise InputError("all components must share one length")
            c.setflags(write=False)
        residual.setflags(write=False)
        if n >= 1 and len(imfs) > max_imf_count(n):
            raise InputError(
                f"{len(imfs)} modes exceeds the floor(log2 {n}) = {max_imf_count(n)} cap"
            )
        object.__setattr__(self, "imfs", imfs)
        object.__setattr__(self, "residual", residual)

    @property
    def length(self) -> int:
        return self.residual.size

    def components(self) -> list[np.ndarray]:
        """IMFs in extraction order, residual last."""
        return list(self.imfs) + [self.residual]


def max_imf_count(n: int) -> int:
    return int(math.floor(math.log2(n)))


@njit(cache=True)
def _extrema_indices(x):
    """One-pass interior extrema scan; returns (max_indices, min_indices).

    A plateau counts as one extremum at its center index (rounded down) and
    only when both flanks exist, i.e. it does not touch either series end.
    """
    n = x.size
    max_idx = np.empty(n // 2 + 2, np.int64)
    min_idx = np.empty(n // 2 + 2, np.int64)
    nmax = 0
    nmin = 0
    i = 0
    while i < n - 1:
        step = x[i + 1] - x[i]
        if step == 0.0:
            lo = i
            while i < n - 1 and x[i + 1] - x[i] == 0.0:
                i += 1
            hi = i  # plateau spans samples lo..hi
            if lo != 0 and hi != n - 1:
                before = x[lo] - x[lo - 1]
                after = x[hi + 1] - x[hi]
                center = (lo + hi) // 2
                if before > 0 and after < 0:
                    max_idx[nmax] = center
                    nmax += 1
                elif before < 0 and after > 0:
                    min_idx[nmin] = center
                    nmin += 1
        else:
            if i >= 1:
                prev = x[i] - x[i - 1]
                if prev > 0 and step < 0:
                    max_idx[nmax] = i
                    nmax += 1
                elif prev < 0 and step > 0:
                    min_idx[nmin] = i
                    nmin += 1
            i += 1
    return max_idx[:nmax], min_idx[:nmin]


def find_extrema(x) -> ExtremaSet:
    """Interior local extrema by three-point comparison.

    A plateau of equal samples flanked by a rise and a fall (or vice versa)
    yields a single extremum at the plateau's center index, rounded down.
    Plateaus touching either end of the series are not extrema.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        raise SeriesTooShortError(f"extrema detection needs at least 3 samples, got {n}")
    max_idx, min_idx = _extrema_indices(x)
    return ExtremaSet(
        max_positions=max_idx.astype(np.float64),
        max_values=x[max_idx],
        min_positions=min_idx.astype(np.float64),
        min_values=x[min_idx],
    )


def _extend_one_kind(pos, val, x, n, policy):
    """Synthetic boundary points for one extremum kind under ``policy``.

    A kind with fewer than two interior points cannot support the linear or
    mirror constructions, so it degrades to endpoint anchors for that kind.
    """
    if pos.size < 2 and policy is not BoundaryPolicy.CLAMP_ENDPOINTS:
        if pos.size == 1 and policy is BoundaryPolicy.MIRROR_REFLECTION:
            left = (-pos[0], val[0])
            right = (2.0 * (n - 1) - pos[0], val[0])
            return left, right
        policy = BoundaryPolicy.CLAMP_ENDPOINTS

    if policy is BoundaryPolicy.CLAMP_ENDPOINTS:
        return (0.0, float(x[0])), (float(n - 1), float(x[-1]))

    if policy is BoundaryPolicy.MIRROR_REFLECTION:
        return (-pos[0], val[0]), (2.0 * (n - 1) - pos[-1], val[-1])

    # Linear extrapolation: continue the line through the outermost two
    # same-kind extrema by one inter-extremum gap; push further out when that
    # would leave part of [0, N-1] uncovered.
    slope_r = (val[-1] - val[-2]) / (pos[-1] - pos[-2])
    gap_r = pos[-1] - pos[-2]
    p_right = pos[-1] + gap_r
    if p_right < n - 1:
        p_right = (n - 1) + gap_r
    v_right = val[-1] + (p_right - pos[-1]) * slope_r

    slope_l = (val[1] - val[0]) / (pos[1] - pos[0])
    gap_l = pos[1] - pos[0]
    p_left = pos[0] - gap_l
    if p_left > 0:
        p_left = -gap_l
    v_left = val[0] + (p_left - pos[0]) * slope_l
    return (p_left, v_left), (p_right, v_right)


def _extend_all(max_pos, max_val, min_pos, min_val, x, policy):
    """Array-level boundary extension shared by the public API and hot path."""
    n = x.size
    if max_pos.size + min_pos.size == 0:
        raise MonotoneInputError("no interior extrema to extend")
    if policy is BoundaryPolicy.LINEAR_EXTRAPOLATION and (
        max_pos.size == 0 or min_pos.size == 0
    ):
        policy = BoundaryPolicy.CLAMP_ENDPOINTS
    out = []
    for pos, val in ((max_pos, max_val), (min_pos, min_val)):
        left, right = _extend_one_kind(pos, val, x, n, policy)
        new_pos = np.concatenate(([left[0]], pos, [right[0]]))
        new_val = np.concatenate(([left[1]], val, [right[1]]))
        # Anchors can coincide with an interior extremum; drop duplicates.
        keep = np.concatenate(([True], np.diff(new_pos) > 0))
        out.append((new_pos[keep], new_val[keep]))
    return out[0], out[1]


def extend_extrema(extrema: ExtremaSet, x, policy: BoundaryPolicy) -> ExtremaSet:
    """Append synthetic extrema beyond both ends so envelopes cover the series."""
    x = np.asarray(x, dtype=np.float64)
    (mp, mv), (np_, nv) = _extend_all(
        extrema.max_positions, extrema.max_values,
        extrema.min_positions, extrema.min_values,
        x, policy,
    )
    return ExtremaSet(
        max_positions=mp,
        max_values=mv,
        min_positions=np_,
        min_values=nv,
        includes_synthetic_endpoints=True,
    )


def envelope(positions, values, n: int) -> np.ndarray:
    """Natural cubic spline through the points, sampled at indices ``0..n-1``.

    Exactly two points degenerate to the straight line through them.
    """
    positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if positions.size < 2:
        raise InputError(f"an envelope needs at least 2 points, got {positions.size}")
    if positions.size == 2:
        t = np.arange(n, dtype=np.float64)
        slope = (values[1] - values[0]) / (positions[1] - positions[0])
        return values[0] + (t - positions[0]) * slope
    return _natural_spline_grid(positions, values, n)


def envelopes(x, config: SiftConfig | None = None) -> EnvelopePair:
    """Lower/upper boundary-extended envelopes of ``x``."""
    config = config or SiftConfig()
    x = np.asarray(x, dtype=np.float64)
    if x.size < 3:
        raise SeriesTooShortError(f"envelopes need at least 3 samples, got {x.size}")
    max_idx, min_idx = _extrema_indices(x)
    (mp, mv), (np_, nv) = _extend_all(
        max_idx.astype(np.float64), x[max_idx],
        min_idx.astype(np.float64), x[min_idx],
        x, config.boundary_policy,
    )
    return EnvelopePair(lower=envelope(np_, nv, x.size), upper=envelope(mp, mv, x.size))


def _stop_value(mean_env: np.ndarray, config: SiftConfig) -> float:
    if config.stop_norm == "mean":
        return float(np.mean(np.abs(mean_env)))
    return float(np.max(np.abs(mean_env)))


def sift_once(x, config: SiftConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One sifting pass: subtract the envelope average from the signal.

    Returns ``(h, mean_envelope)``. Raises :class:`MonotoneInputError` when
    the input has no interior extrema to build envelopes from.
    """
    config = config or SiftConfig()
    x = np.asarray(x, dtype=np.float64)
    pair = envelopes(x, config)
    mean_env = 0.5 * (pair.lower + pair.upper)
    return x - mean_env, mean_env


def _resolve_epsilon(config: SiftConfig, x: np.ndarray) -> float:
    if config.epsilon is not None:
        return config.epsilon
    scale = float(np.std(x))
    return 1e-4 * scale if scale > 0 else 1e-12


def extract_imf(x, config: SiftConfig | None = None) -> tuple[np.ndarray, int]:
    """Sift until the candidate's mean envelope drops below epsilon.

    Returns the extracted mode and the number of sifting subtractions
    applied. The iteration cap wins over the envelope criterion when both
    could apply.
    """
    config = config or SiftConfig()
    x = np.asarray(x, dtype=np.float64)
    eps = _resolve_epsilon(config, x)
    h, _ = sift_once(x, config)
    iterations = 1
    while iterations < config.max_sift_iterations:
        try:
            h_next, mean_env = sift_once(h, config)
        except MonotoneInputError:
            break
        if _stop_value(mean_env, config) <= eps:
            break
        h = h_next
        iterations += 1
    return h, iterations


def is_monotone(x) -> bool:
    """Non-strict monotonicity (equal neighbors allowed)."""
    d = np.diff(np.asarray(x, dtype=np.float64))
    return bool(np.all(d >= 0) or np.all(d <= 0))


def _siftable(x: np.ndarray) -> bool:
    # A remainder with fewer than two interior extrema is kept as residual:
    # one lone extremum cannot support both envelopes robustly.
    if x.size < 3:
        return False
    max_idx, min_idx = _extrema_indices(x)
    return max_idx.size + min_idx.size >= 2


def decompose(values, config: SiftConfig | None = None) -> Decomposition:
    """Plain decomposition of a raw sample array; see :func:`emd`."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 8:
        raise SeriesTooShortError(f"decomposition needs at least 8 samples, got {n}")
    config = config or SiftConfig()
    cap = max_imf_count(n)
    limit = cap if config.max_imfs is None else min(config.max_imfs, cap)
    resolved = replace(config, epsilon=_resolve_epsilon(config, x))

    imfs: list[np.ndarray] = []
    residual = x.copy()
    while len(imfs) < limit and not is_monotone(residual) and _siftable(residual):
        imf, _ = extract_imf(residual, resolved)
        imfs.append(imf)
        residual = residual - imf
    return Decomposition(imfs=tuple(imfs), residual=residual, method="EMD", config=config)


def emd(ts: TimeSeries, config: SiftConfig | None = None) -> Decomposition:
    """Decompose a series into oscillatory modes plus a monotone-ish residual."""
    return decompose(ts.values, config)


def reconstruct(d: Decomposition) -> np.ndarray:
    """Elementwise sum of every mode and the residual."""
    total = d.residual.copy()
    for c in d.imfs:
        if c.size != total.size:
            raise InputError("component length mismatch")
        total += c
    return total


def zero_crossings(x) -> int:
    """Sign-change count, ignoring exact zeros."""
    x = np.asarray(x, dtype=np.float64)
    s = np.sign(x)
    s = s[s != 0]
    if s.size < 2:
        return 0
    return int(np.sum(s[1:] != s[:-1]))


def write_decomposition_csv(path, ts: TimeSeries, d: Decomposition) -> None:
    """``timestamp,imf1,...,imfK,residual`` rows, one per sample."""
    if d.length != len(ts):
        raise InputError("decomposition length does not match the series")
    header = ["timestamp"] + [f"imf{i + 1}" for i in range(len(d.imfs))] + ["residual"]
    columns = d.components()
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i, stamp in enumerate(ts.timestamps()):
            row = [stamp.strftime(_TS_FORMAT)] + [repr(float(c[i])) for c in columns]
            fh.write(",".join(row) + "\n")
