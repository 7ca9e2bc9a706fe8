"""Noise-assisted decomposition variants and reconstruction fidelity.

The ensemble variants run the plain decomposition on many noise-perturbed
copies of the input and average the modes. The complementary variant injects
each noise draw twice with opposite signs, so the injected noise cancels
exactly in the averaged reconstruction; the plain ensemble variant leaves a
residual noise floor. ``reconstruction_snr`` quantifies the difference.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emd import Decomposition, SiftConfig, decompose, reconstruct
from .exceptions import DegenerateInputError, InputError
from .series import TimeSeries

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble size, noise amplitude (as a fraction of input std), seeding."""

    num_ensembles: int = 100
    noise_std_fraction: float = 0.2
    master_seed: int = 0
    sift: SiftConfig = field(default_factory=SiftConfig)

    def __post_init__(self):
        if self.num_ensembles < 1:
            raise InputError("num_ensembles must be at least 1")
        if self.noise_std_fraction < 0:
            raise InputError("noise_std_fraction must be non-negative")


def stream_seed(master_seed: int, index: int) -> int:
    """Deterministic child seed derived from (master seed, index).

    Counter-based, so parallel and serial consumers agree on every stream.
    """
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def white_noise(n: int, std: float, stream_seed: int) -> np.ndarray:
    """I.i.d. Gaussian samples with mean 0 and the given standard deviation."""
    if n < 1:
        raise InputError("n must be at least 1")
    if std < 0:
        raise InputError("std must be non-negative")
    if std == 0:
        return np.zeros(n)
    rng = np.random.default_rng(stream_seed)
    return rng.normal(0.0, std, size=n)


def _injected_noises(n: int, noise_std: float, config: EnsembleConfig, paired: bool):
    """The exact noise sequences each ensemble member adds, in member order.

    Paired mode reuses one draw per pair with flipped sign, so the sequences
    sum to zero exactly.
    """
    if paired:
        noises = []
        for pair in range(config.num_ensembles // 2):
            eps = white_noise(n, noise_std, stream_seed(config.master_seed, pair))
            noises.append(eps)
            noises.append(-eps)
        return noises
    return [
        white_noise(n, noise_std, stream_seed(config.master_seed, e))
        for e in range(config.num_ensembles)
    ]


def _ensemble_decompose(x: TimeSeries, config: EnsembleConfig, method: str) -> Decomposition:
    values = x.values
    n = values.size
    noise_std = config.noise_std_fraction * float(np.std(values))
    noises = _injected_noises(n, noise_std, config, paired=(method == "CEEMD"))
    members = [decompose(values + eps, config.sift) for eps in noises]
    width = max(len(d.imfs) for d in members)
    logger.debug("%s: %d members, %d..%d modes", method, len(members),
                 min(len(d.imfs) for d in members), width)

    # Fixed ascending-member order with compensated summation, so results do
    # not depend on how members were scheduled.
    totals = [np.zeros(n) for _ in range(width + 1)]
    carries = [np.zeros(n) for _ in range(width + 1)]
    for d in members:
        columns = list(d.imfs) + [np.zeros(n)] * (width - len(d.imfs)) + [d.residual]
        for total, carry, term in zip(totals, carries, columns):
            y = term - carry
            t = total + y
            carry[:] = (t - total) - y
            total[:] = t
    scale = 1.0 / len(members)
    averaged = [total * scale for total in totals]
    return Decomposition(
        imfs=tuple(averaged[:-1]), residual=averaged[-1], method=method, config=config
    )


def eemd(x: TimeSeries, config: EnsembleConfig) -> Decomposition:
    """Ensemble decomposition: average modes over noise-perturbed copies."""
    return _ensemble_decompose(x, config, "EEMD")


def ceemd(x: TimeSeries, config: EnsembleConfig) -> Decomposition:
    """Complementary ensemble decomposition: noise injected in +/- pairs."""
    if config.num_ensembles % 2 != 0:
        raise InputError(
            f"paired noise needs an even ensemble count, got {config.num_ensembles}"
        )
    return _ensemble_decompose(x, config, "CEEMD")


def reconstruction_snr(x: TimeSeries, d: Decomposition) -> float:
    """Signal-to-noise ratio (dB) of the reconstruction against the input.

    Returns ``math.inf`` when the reconstruction is exact (zero error
    energy); callers report that case as "exact".
    """
    values = x.values
    if d.length != values.size:
        raise InputError("decomposition length does not match the series")
    signal_energy = float(np.sum(values * values))
    if signal_energy == 0:
        raise DegenerateInputError("SNR is undefined for an all-zero series")
    err = values - reconstruct(d)
    error_energy = float(np.sum(err * err))
    if error_energy == 0:
        return math.inf
    return 10.0 * math.log10(signal_energy / error_energy)


def write_ensemble_metadata(path, d: Decomposition) -> None:
    """JSON sidecar describing how an ensemble decomposition was produced."""
    config = d.config
    payload = {"method": d.method}
    if isinstance(config, EnsembleConfig):
        payload.update(
            NE=config.num_ensembles,
            noise_std_fraction=config.noise_std_fraction,
            master_seed=config.master_seed,
        )
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
