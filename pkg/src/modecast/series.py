"""Hourly time-series container, CSV ingestion, scaling, splitting, synthesis.

The synthetic generators stand in for proprietary utility data: a load-like
preset (daily + weekly cycles over a positive base level) and a wind-like
preset (fast cycle, heavy autocorrelated noise, clipped at zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import CsvFormatError, DegenerateInputError, InputError

HOUR = timedelta(hours=1)
_TS_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

_DEFAULT_START = datetime(2019, 1, 1, tzinfo=timezone.utc)


def _as_readonly(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled series with hourly timestamps.

    ``values`` is stored as a read-only float64 array; instances are safe to
    share across threads.
    """

    values: np.ndarray
    start_time: datetime = _DEFAULT_START
    step: timedelta = HOUR
    name: str = "series"

    def __post_init__(self):
        object.__setattr__(self, "values", _as_readonly(self.values))
        if self.values.ndim != 1 or self.values.size == 0:
            raise InputError("a TimeSeries needs a non-empty 1-D value array")
        if not np.all(np.isfinite(self.values)):
            bad = int(np.flatnonzero(~np.isfinite(self.values))[0])
            raise InputError(f"non-finite sample at index {bad}")
        if self.step <= timedelta(0):
            raise InputError("step must be a positive duration")

    def __len__(self) -> int:
        return self.values.size

    def timestamps(self) -> list[datetime]:
        return [self.start_time + i * self.step for i in range(len(self))]

    def with_values(self, values, name: str | None = None) -> "TimeSeries":
        """Same clock, different samples."""
        return TimeSeries(values, self.start_time, self.step, name or self.name)


@dataclass(frozen=True)
class ScaleParams:
    """Affine map parameters sufficient to invert a normalization exactly."""

    observed_min: float
    observed_max: float
    target_low: float = -1.0
    target_high: float = 1.0

    def __post_init__(self):
        if not self.observed_min < self.observed_max:
            raise DegenerateInputError(
                f"observed range is empty: min={self.observed_min}, max={self.observed_max}"
            )
        if not self.target_low < self.target_high:
            raise InputError("target_low must be below target_high")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic series.

    ``sinusoids`` is a list of (amplitude, period-in-hours, phase) triples;
    the noise term is an AR(1) process driven by Gaussian innovations of
    standard deviation ``noise_std``.
    """

    length: int
    sinusoids: Sequence[tuple[float, float, float]] = field(default_factory=list)
    ar1_coefficient: float = 0.0
    noise_std: float = 0.0
    trend_slope: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 2:
            raise InputError("length must be at least 2")
        if self.noise_std < 0:
            raise InputError("noise_std must be non-negative")
        if not abs(self.ar1_coefficient) < 1:
            raise InputError("ar1_coefficient must lie strictly inside (-1, 1)")


def load_csv(path) -> TimeSeries:
    """Read a ``timestamp,value`` CSV of hourly samples.

    Raises :class:`CsvFormatError` naming the offending line for malformed
    rows, non-numeric values, and timestamp gaps or disorder.
    """
    path = Path(path)
    if not path.exists():
        raise CsvFormatError(f"no such file: {path}")
    values: list[float] = []
    start: datetime | None = None
    prev: datetime | None = None
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "timestamp,value":
            raise CsvFormatError("expected header 'timestamp,value'", line=1)
        for lineno, raw in enumerate(fh, start=2):
            row = raw.strip()
            if not row:
                continue
            parts = row.split(",")
            if len(parts) != 2:
                raise CsvFormatError(f"expected 2 fields, got {len(parts)}", line=lineno)
            try:
                stamp = datetime.strptime(parts[0], _TS_FORMAT).replace(tzinfo=timezone.utc)
            except ValueError:
                raise CsvFormatError(f"bad timestamp {parts[0]!r}", line=lineno) from None
            try:
                value = float(parts[1])
            except ValueError:
                raise CsvFormatError(f"non-numeric value {parts[1]!r}", line=lineno) from None
            if not math.isfinite(value):
                raise CsvFormatError(f"non-finite value {parts[1]!r}", line=lineno)
            if prev is not None:
                delta = stamp - prev
                if delta != HOUR:
                    kind = "gap" if delta > HOUR else "disorder"
                    raise CsvFormatError(
                        f"timestamp {kind}: {parts[0]} does not follow by exactly one hour",
                        line=lineno,
                    )
            else:
                start = stamp
            prev = stamp
            values.append(value)
    if not values:
        raise CsvFormatError("file contains no data rows")
    return TimeSeries(values, start_time=start, name=path.stem)


def save_csv(ts: TimeSeries, path) -> None:
    """Write a series in the same format :func:`load_csv` reads."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,value\n")
        for stamp, value in zip(ts.timestamps(), ts.values):
            fh.write(f"{stamp.strftime(_TS_FORMAT)},{float(value)!r}\n")


def normalize(
    ts: TimeSeries, target_low: float = -1.0, target_high: float = 1.0
) -> tuple[TimeSeries, ScaleParams]:
    """Affine-map the series so observed min/max land exactly on the targets."""
    lo = float(np.min(ts.values))
    hi = float(np.max(ts.values))
    params = ScaleParams(lo, hi, target_low, target_high)
    scale = (target_high - target_low) / (hi - lo)
    scaled = target_low + (ts.values - lo) * scale
    return ts.with_values(scaled), params


def denormalize(ts: TimeSeries, params: ScaleParams) -> TimeSeries:
    """Exact inverse of :func:`normalize` up to floating-point rounding."""
    scale = (params.observed_max - params.observed_min) / (params.target_high - params.target_low)
    restored = params.observed_min + (ts.values - params.target_low) * scale
    return ts.with_values(restored)


# AR(1) warm-up discarded so the noise starts near stationarity.
_AR1_WARMUP = 100


def synth_generate(spec: SynthSpec) -> TimeSeries:
    """Deterministic trend + sinusoids + AR(1) noise, fixed by ``spec.seed``."""
    n = spec.length
    idx = np.arange(n, dtype=np.float64)
    values = spec.trend_slope * idx
    for amplitude, period, phase in spec.sinusoids:
        if period <= 0:
            raise InputError(f"sinusoid period must be positive, got {period}")
        values = values + amplitude * np.sin(2.0 * np.pi * idx / period + phase)
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        innovations = rng.normal(0.0, spec.noise_std, size=n + _AR1_WARMUP)
        noise = np.empty(n + _AR1_WARMUP)
        acc = 0.0
        phi = spec.ar1_coefficient
        for i, w in enumerate(innovations):
            acc = phi * acc + w
            noise[i] = acc
        values = values + noise[_AR1_WARMUP:]
    return TimeSeries(values, name=f"synth-{spec.seed}")


def train_test_split(ts: TimeSeries, train_fraction: float) -> tuple[TimeSeries, TimeSeries]:
    """Contiguous prefix/suffix split at ``floor(N * train_fraction)``."""
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(ts)
    cut = int(math.floor(n * train_fraction))
    if cut == 0 or cut == n:
        raise InputError(
            f"split at {cut} of {n} samples leaves an empty part (fraction={train_fraction})"
        )
    train = TimeSeries(ts.values[:cut], ts.start_time, ts.step, f"{ts.name}-train")
    test = TimeSeries(ts.values[cut:], ts.start_time + cut * ts.step, ts.step, f"{ts.name}-test")
    return train, test


def load_preset(length: int, seed: int) -> TimeSeries:
    """Load-shaped synthetic: daily and weekly cycles over a positive base level."""
    spec = SynthSpec(
        length=length,
        sinusoids=[(200.0, 24.0, 0.3), (100.0, 168.0, 1.1)],
        ar1_coefficient=0.7,
        noise_std=25.0,
        trend_slope=0.01,
        seed=seed,
    )
    base = synth_generate(spec)
    # Base level keeps every sample well above zero so MAPE is defined.
    return TimeSeries(base.values + 1000.0, name=f"load-{seed}")


def wind_preset(length: int, seed: int) -> TimeSeries:
    """Wind-shaped synthetic: fast cycle, strong AR(1) noise, clipped at zero."""
    spec = SynthSpec(
        length=length,
        sinusoids=[(4.0, 12.0, 0.0)],
        ar1_coefficient=0.85,
        noise_std=2.0,
        trend_slope=0.0,
        seed=seed,
    )
    base = synth_generate(spec)
    clipped = np.clip(base.values + 6.0, 0.0, None)
    return TimeSeries(clipped, name=f"wind-{seed}")


PRESETS = {"load": load_preset, "wind": wind_preset}
