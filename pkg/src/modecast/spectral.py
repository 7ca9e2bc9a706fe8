"""Time-frequency and autocorrelation diagnostics for decomposed modes.

A short-time Fourier magnitude grid shows where a mode's frequency content
wanders (local distortion shows up as frame-to-frame jitter of the dominant
bin), and the sample partial autocorrelation shows how much linear memory a
mode carries for lag selection.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DegenerateInputError, InputError

#: samples per hour; the package works on hourly series throughout.
_SAMPLE_RATE = 1.0


@dataclass(frozen=True)
class Spectrogram:
    """One-sided Hann-windowed magnitude grid, frames by frequency bins."""

    magnitudes: np.ndarray
    frame_hop: int
    window_length: int
    bin_width: float

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        mags.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)
        if mags.ndim != 2 or mags.shape[1] != self.window_length // 2 + 1:
            raise InputError("magnitude grid must be frames x (window/2 + 1) bins")

    @property
    def frame_count(self) -> int:
        return self.magnitudes.shape[0]

    def frequencies(self) -> np.ndarray:
        """Bin centers in cycles/hour."""
        return np.arange(self.window_length // 2 + 1) * self.bin_width


@dataclass(frozen=True)
class PacfResult:
    """Partial autocorrelations for lags 0..max_lag plus the white-noise band."""

    values: np.ndarray
    confidence_band: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def hann_window(window_length: int) -> np.ndarray:
    """Periodic Hann taper; its spectrum occupies exactly bins 0 and +/-1,
    so bin-aligned content stays bin-aligned after windowing."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window_length) / window_length)


def stft(x, window_length: int, hop: int) -> Spectrogram:
    """Hann-windowed one-sided DFT magnitudes per frame.

    Frames start every ``hop`` samples; a final frame that would run past the
    end of the series is discarded.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if window_length > n:
        raise InputError(f"window of {window_length} exceeds series length {n}")
    if window_length % 2 != 0:
        raise InputError("window_length must be even")
    if hop < 1:
        raise InputError("hop must be at least 1")
    window = hann_window(window_length)
    starts = range(0, n - window_length + 1, hop)
    mags = np.empty((len(starts), window_length // 2 + 1))
    for row, start in enumerate(starts):
        frame = x[start:start + window_length] * window
        mags[row] = np.abs(np.fft.rfft(frame))
    return Spectrogram(
        magnitudes=mags,
        frame_hop=hop,
        window_length=window_length,
        bin_width=_SAMPLE_RATE / window_length,
    )


def pacf(x, max_lag: int) -> PacfResult:
    """Sample partial autocorrelations via the Durbin-Levinson recursion."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if max_lag < 0:
        raise InputError("max_lag must be non-negative")
    if max_lag >= n / 2:
        raise InputError(f"max_lag {max_lag} must be below N/2 = {n / 2:g}")
    centered = x - x.mean()
    gamma = np.empty(max_lag + 1)
    gamma[0] = centered.dot(centered) / n
    if gamma[0] == 0:
        raise DegenerateInputError("PACF is undefined for a constant series")
    for k in range(1, max_lag + 1):
        gamma[k] = centered[k:].dot(centered[:-k]) / n

    values = np.empty(max_lag + 1)
    values[0] = 1.0
    if max_lag >= 1:
        phi = np.zeros(max_lag + 1)
        phi[1] = gamma[1] / gamma[0]
        values[1] = phi[1]
        variance = gamma[0] * (1.0 - phi[1] ** 2)
        for k in range(2, max_lag + 1):
            prev = phi[1:k].copy()
            num = gamma[k] - prev.dot(gamma[k - 1:0:-1])
            phi_kk = num / variance
            phi[1:k] = prev - phi_kk * prev[::-1]
            phi[k] = phi_kk
            values[k] = phi_kk
            variance *= 1.0 - phi_kk ** 2
    return PacfResult(values=values, confidence_band=1.96 / np.sqrt(n))


def dominant_bins(spec: Spectrogram) -> np.ndarray:
    """Per-frame index of the strongest frequency bin."""
    return np.argmax(spec.magnitudes, axis=1)


def write_spectrogram_csv(path, spec: Spectrogram) -> None:
    """Long-format rows ``frame_start_index,frequency_cycles_per_hour,magnitude``."""
    freqs = spec.frequencies()
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame_start_index,frequency_cycles_per_hour,magnitude\n")
        for frame in range(spec.frame_count):
            start = frame * spec.frame_hop
            for freq, mag in zip(freqs, spec.magnitudes[frame]):
                fh.write(f"{start},{float(freq)!r},{float(mag)!r}\n")


def write_pacf_csv(path, result: PacfResult) -> None:
    """Rows ``lag,pacf,band``."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("lag,pacf,band\n")
        for lag, value in enumerate(result.values):
            fh.write(f"{lag},{float(value)!r},{float(result.confidence_band)!r}\n")
