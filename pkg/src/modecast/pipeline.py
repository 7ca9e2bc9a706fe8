"""Per-component forecasting: decompose, select lags, train, sum predictions.

One engine is trained per decomposed component (each mode and the residual),
on lags picked by the greedy relevance/redundancy selector and
hyperparameters picked by time-ordered cross-validation. A one-step forecast
is the ascending-order sum of the per-component predictions; component
histories are supplied by the caller so the same trained model serves both
the oracle and the real-time evaluation protocols.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .emd import Decomposition, decompose
from .ensemble import EnsembleConfig, ceemd, eemd, stream_seed
from .exceptions import InputError
from .features import (
    DEFAULT_BINS,
    DEFAULT_K,
    DEFAULT_LAG_POOL,
    build_lag_matrix,
    mrmr_select,
    mutual_information,
)
from .predict import default_grid, grid_search_cv, predict_rows, train_engine
from .series import TimeSeries

logger = logging.getLogger(__name__)

METHODS = ("EMD", "EEMD", "CEEMD", "NONE")


@dataclass(frozen=True)
class ForecastConfig:
    """Everything needed to fit and rerun a forecaster deterministically."""

    method: str = "CEEMD"
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    engine: str = "ELM"
    lag_pool: tuple = DEFAULT_LAG_POOL
    mrmr_k: int = DEFAULT_K
    mrmr_bins: int = DEFAULT_BINS
    grids: dict | None = None
    seed: int = 0
    cv_folds: int = 5
    retrain_each_step: bool = False
    cv_row_cap: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.lag_pool:
            raise InputError("lag_pool must be non-empty")
        if self.mrmr_k < 1:
            raise InputError("mrmr_k must be at least 1")
        if self.cv_row_cap is not None and self.cv_row_cap < 2 * self.cv_folds:
            raise InputError("cv_row_cap leaves too few rows for cross-validation")


@dataclass(frozen=True)
class ComponentModel:
    """One trained engine plus the lag view it expects."""

    label: str
    lags: tuple
    engine: str
    model: object
    best_params: dict
    cv_score: float
    relevance: tuple

    @property
    def max_lag(self) -> int:
        return max(self.lags)


@dataclass(frozen=True)
class ForecastModel:
    """Per-component engines; component order is modes first, residual last."""

    components: tuple
    method: str
    engine: str
    train_length: int
    config: ForecastConfig

    @property
    def component_count(self) -> int:
        return len(self.components)


def run_decomposition(method: str, ts: TimeSeries, ensemble: EnsembleConfig):
    """Dispatch to the configured decomposition; ``NONE`` returns ``None``."""
    if method == "NONE":
        return None
    if method == "EMD":
        return decompose(ts.values, ensemble.sift)
    if method == "EEMD":
        return eemd(ts, ensemble)
    if method == "CEEMD":
        return ceemd(ts, ensemble)
    raise InputError(f"method must be one of {METHODS}, got {method!r}")


def component_labels(d: Decomposition | None) -> list[str]:
    if d is None:
        return ["series"]
    return [f"imf{i + 1}" for i in range(len(d.imfs))] + ["residual"]


def fit_components(
    component_values: Sequence, labels: Sequence[str], config: ForecastConfig,
    train_length: int | None = None,
) -> ForecastModel:
    """Select lags, tune, and train one engine per supplied component."""
    fitted = []
    for idx, (values, label) in enumerate(zip(component_values, labels)):
        values = np.asarray(values, dtype=np.float64)
        pool = [lag for lag in config.lag_pool if lag < values.size]
        if not pool:
            raise InputError(f"component {label} is shorter than every candidate lag")
        full = build_lag_matrix(values, pool, source=label)
        k = min(config.mrmr_k, len(pool))
        selected = mrmr_select(full, k, config.mrmr_bins)
        relevance = tuple(
            mutual_information(full.column(lag), full.targets, config.mrmr_bins)
            for lag in sorted(selected)
        )
        fm = full.select(selected)
        cv_fm = fm
        if config.cv_row_cap is not None and len(fm) > config.cv_row_cap:
            tail = slice(len(fm) - config.cv_row_cap, len(fm))
            cv_fm = type(fm)(fm.rows[tail], fm.targets[tail], fm.lag_labels, fm.source)
        grid = None if config.grids is None else config.grids.get(config.engine)
        if grid is None:
            grid = default_grid(config.engine, float(np.std(fm.targets)))
        seed = stream_seed(config.seed, idx)
        result = grid_search_cv(cv_fm, config.engine, grid, config.cv_folds, seed)
        model = train_engine(config.engine, fm, result.best_params, seed)
        best_score = min(result.cv_scores)
        logger.debug("component %s: lags=%s params=%s cv=%.4g",
                      label, fm.lag_labels, result.best_params, best_score)
        fitted.append(
            ComponentModel(
                label=label,
                lags=fm.lag_labels,
                engine=config.engine,
                model=model,
                best_params=result.best_params,
                cv_score=best_score,
                relevance=relevance,
            )
        )
    return ForecastModel(
        components=tuple(fitted),
        method=config.method,
        engine=config.engine,
        train_length=train_length if train_length is not None else 0,
        config=config,
    )


#: engine training needs this many rows beyond the deepest lag.
MIN_TRAINING_ROWS = 50


def fit_forecaster(train: TimeSeries, config: ForecastConfig) -> ForecastModel:
    """Decompose the training series and fit one engine per component."""
    needed = max(config.lag_pool) + MIN_TRAINING_ROWS
    if len(train) < needed:
        raise InputError(
            f"training series of {len(train)} samples is shorter than "
            f"max lag + {MIN_TRAINING_ROWS} = {needed}"
        )
    d = run_decomposition(config.method, train, config.ensemble)
    values = [train.values] if d is None else d.components()
    return fit_components(values, component_labels(d), config, train_length=len(train))


def forecast_components(model: ForecastModel, component_histories) -> np.ndarray:
    """One-step-ahead prediction of every component from its own history."""
    if len(component_histories) != model.component_count:
        raise InputError(
            f"expected {model.component_count} component histories, "
            f"got {len(component_histories)}"
        )
    out = np.empty(model.component_count)
    for idx, comp in enumerate(model.components):
        history = np.asarray(component_histories[idx], dtype=np.float64)
        if history.size < comp.max_lag:
            raise InputError(
                f"component {comp.label} history of {history.size} samples "
                f"cannot serve lag {comp.max_lag}"
            )
        vector = np.array([history[history.size - lag] for lag in comp.lags])
        out[idx] = predict_rows(comp.engine, comp.model, vector[None, :])[0]
    return out


def forecast_one(model: ForecastModel, component_histories) -> float:
    """Sum of the per-component predictions, accumulated in component order."""
    total = 0.0
    for value in forecast_components(model, component_histories):
        total += float(value)
    return total


def forecast_series(
    model: ForecastModel,
    component_histories,
    horizon_steps: int,
    update: Callable | None = None,
) -> np.ndarray:
    """Iterate one-step forecasts over a horizon.

    After each step (except the last) the ``update`` callback receives
    ``(step_index, forecast)`` and returns the refreshed component histories,
    letting the caller decide how realized values enter the next step.
    """
    if horizon_steps < 1:
        raise InputError("horizon_steps must be at least 1")
    histories = component_histories
    out = np.empty(horizon_steps)
    for step in range(horizon_steps):
        out[step] = forecast_one(model, histories)
        if update is not None and step < horizon_steps - 1:
            histories = update(step, out[step])
    return out
