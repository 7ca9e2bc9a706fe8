"""Error metrics, the three evaluation protocols, and the boundary probe.

The protocols isolate the boundary effect: scenario I decomposes the whole
series up front (so test-time component values were computed knowing the
future), scenario II re-decomposes in real time as each test point arrives
(components near the moving end are distorted), and scenario III skips
decomposition entirely. Comparing them quantifies how much of the
decomposition advantage survives real-time use.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .emd import BoundaryPolicy, SiftConfig, decompose
from .ensemble import EnsembleConfig
from .exceptions import DegenerateInputError, InputError, ModecastError
from .pipeline import (
    ForecastConfig,
    ForecastModel,
    component_labels,
    fit_components,
    fit_forecaster,
    forecast_components,
    run_decomposition,
)
from .series import PRESETS, TimeSeries, train_test_split

logger = logging.getLogger(__name__)

SCENARIOS = ("I", "II", "III")

TRAIN_FRACTION = 0.8

# Suite defaults, sized for desk-scale serial runtime.
SUITE_LENGTH = 2000
SUITE_STEP_CAP = 200
SUITE_ENSEMBLES = 8
SUITE_NOISE_FRACTION = 0.2
SUITE_WINDOW = 1024
SUITE_CV_ROW_CAP = 768


def mape(actual, forecast) -> float:
    """Mean absolute percentage error; refuses zero denominators."""
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if a.size == 0:
        raise InputError("empty input")
    if a.size != f.size:
        raise InputError(f"length mismatch: {a.size} actuals vs {f.size} forecasts")
    zeros = np.flatnonzero(a == 0)
    if zeros.size:
        raise DegenerateInputError(
            f"actual value is zero at index {int(zeros[0])}; percentage error undefined"
        )
    return float(np.mean(np.abs(f - a) / a) * 100.0)


def rmse(actual, forecast) -> float:
    """Root-mean-square error."""
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if a.size == 0:
        raise InputError("empty input")
    if a.size != f.size:
        raise InputError(f"length mismatch: {a.size} actuals vs {f.size} forecasts")
    diff = f - a
    return float(np.sqrt(np.mean(diff * diff)))


def config_snapshot(config: ForecastConfig) -> dict:
    """JSON-ready copy of a forecast configuration."""
    raw = dataclasses.asdict(config)
    raw["ensemble"]["sift"]["boundary_policy"] = (
        config.ensemble.sift.boundary_policy.value
    )
    return raw


@dataclass(frozen=True)
class ScenarioReport:
    """One protocol's accuracy on one series with one engine."""

    scenario: str
    engine: str
    preset: str
    seed: int
    steps: int
    rmse: float
    mape: float | None
    runtime_seconds: float
    config: dict
    error: str | None = None

    def payload(self) -> dict:
        """Deterministic part of the report (wall-clock time excluded)."""
        return {
            "preset": self.preset,
            "engine": self.engine,
            "scenario": self.scenario,
            "seed": self.seed,
            "steps": self.steps,
            "mape": self.mape,
            "rmse": self.rmse,
            "config": self.config,
            "error": self.error,
        }


@dataclass(frozen=True)
class ScenarioWalk:
    """Per-step detail behind a report, for export and inspection."""

    start_index: int
    actuals: np.ndarray
    forecasts: np.ndarray
    component_predictions: np.ndarray
    component_names: tuple
    model: ForecastModel


def _align_histories(d, component_count: int) -> list[np.ndarray]:
    """Map a fresh decomposition onto a model's component slots.

    Extra slow modes fold into the residual slot (preserving the sum);
    missing modes become zero histories.
    """
    imfs = list(d.imfs)
    residual = d.residual
    want = component_count - 1
    if len(imfs) > want:
        for extra in imfs[want:]:
            residual = residual + extra
        imfs = imfs[:want]
    elif len(imfs) < want:
        imfs = imfs + [np.zeros(d.length)] * (want - len(imfs))
    return imfs + [residual]


def _refit(model: ForecastModel, histories, config: ForecastConfig) -> ForecastModel:
    """Re-train every component engine on its refreshed history, keeping the
    already-selected lags and hyperparameters."""
    from .features import build_lag_matrix
    from .predict import train_engine
    from .ensemble import stream_seed

    refitted = []
    for idx, comp in enumerate(model.components):
        fm = build_lag_matrix(histories[idx], comp.lags, source=comp.label).select(comp.lags)
        engine = train_engine(comp.engine, fm, comp.best_params, stream_seed(config.seed, idx))
        refitted.append(dataclasses.replace(comp, model=engine))
    return dataclasses.replace(model, components=tuple(refitted))


def scenario_walk(
    scenario: str,
    ts: TimeSeries,
    config: ForecastConfig,
    step_cap: int | None,
    redecompose_window: int | None,
) -> ScenarioWalk:
    if scenario not in SCENARIOS:
        raise InputError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if scenario in ("I", "II") and config.method == "NONE":
        raise InputError(f"scenario {scenario} needs a decomposition method")

    train, test = train_test_split(ts, TRAIN_FRACTION)
    split = len(train)
    steps = len(test) if step_cap is None else min(len(test), step_cap)
    actuals = ts.values[split:split + steps]

    if scenario == "I":
        d_full = run_decomposition(config.method, ts, config.ensemble)
        components_full = d_full.components()
        names = component_labels(d_full)
        model = fit_components(
            [c[:split] for c in components_full], names, config, train_length=split
        )
        preds = np.empty((steps, model.component_count))
        for t in range(steps):
            histories = [c[:split + t] for c in components_full]
            preds[t] = forecast_components(model, histories)

    elif scenario == "II":
        d_train = run_decomposition(config.method, train, config.ensemble)
        names = component_labels(d_train)
        model = fit_components(d_train.components(), names, config, train_length=split)
        preds = np.empty((steps, model.component_count))
        for t in range(steps):
            grown = ts.values[:split + t]
            view = grown if redecompose_window is None else grown[-redecompose_window:]
            d_now = run_decomposition(
                config.method, TimeSeries(view, name="window"), config.ensemble
            )
            histories = _align_histories(d_now, model.component_count)
            active = model
            if config.retrain_each_step and t > 0:
                active = _refit(model, histories, config)
            preds[t] = forecast_components(active, histories)

    else:  # scenario III: raw lags, realized history, no decomposition
        raw_config = replace(config, method="NONE")
        model = fit_forecaster(train, raw_config)
        names = ["series"]
        preds = np.empty((steps, 1))
        for t in range(steps):
            preds[t] = forecast_components(model, [ts.values[:split + t]])

    forecasts = preds.sum(axis=1)
    return ScenarioWalk(
        start_index=split,
        actuals=actuals,
        forecasts=forecasts,
        component_predictions=preds,
        component_names=tuple(names),
        model=model,
    )


def run_scenario(
    scenario: str,
    ts: TimeSeries,
    config: ForecastConfig,
    step_cap: int | None = None,
    redecompose_window: int | None = None,
    with_mape: bool = True,
    preset: str = "",
) -> ScenarioReport:
    """Evaluate one protocol; accuracy is computed on the actual scale."""
    started = time.perf_counter()
    walk = scenario_walk(scenario, ts, config, step_cap, redecompose_window)
    elapsed = time.perf_counter() - started
    report = ScenarioReport(
        scenario=scenario,
        engine=config.engine,
        preset=preset,
        seed=config.seed,
        steps=walk.actuals.size,
        rmse=rmse(walk.actuals, walk.forecasts),
        mape=mape(walk.actuals, walk.forecasts) if with_mape else None,
        runtime_seconds=elapsed,
        config=config_snapshot(config),
    )
    logger.info(
        "scenario %s %s %s seed=%d: rmse=%.4f%s (%.1fs)",
        scenario, preset or ts.name, config.engine, config.seed, report.rmse,
        "" if report.mape is None else f" mape={report.mape:.4f}", elapsed,
    )
    return report


@dataclass(frozen=True)
class BoundaryDivergence:
    """Per-mode |truncated - full| over the comparison window."""

    per_imf_divergence: tuple
    window: tuple

    @property
    def window_length(self) -> int:
        return self.window[1] - self.window[0]


def boundary_divergence(
    ts: TimeSeries, lookahead: int, config: SiftConfig | None = None, window: int = 48
) -> BoundaryDivergence:
    """Compare decompositions with and without the last ``lookahead`` samples.

    The divergence is measured over the final ``window`` samples of the
    truncated range, where a real-time decomposition would feed a forecaster.
    """
    if lookahead < 0 or window < 1:
        raise InputError("lookahead must be >= 0 and window >= 1")
    n = len(ts)
    if n <= lookahead + window:
        raise InputError(
            f"series of {n} samples cannot host lookahead {lookahead} + window {window}"
        )
    config = config or SiftConfig()
    truncated = decompose(ts.values[:n - lookahead], config)
    full = decompose(ts.values, config)
    shared = min(len(truncated.imfs), len(full.imfs))
    end = n - lookahead
    view = slice(end - window, end)
    divergences = tuple(
        np.abs(truncated.imfs[i][view] - full.imfs[i][view]) for i in range(shared)
    )
    return BoundaryDivergence(per_imf_divergence=divergences, window=(end - window, end))


def suite_forecast_config(engine: str, seed: int) -> ForecastConfig:
    """The per-cell configuration used by the benchmark suite."""
    return ForecastConfig(
        method="CEEMD",
        ensemble=EnsembleConfig(
            num_ensembles=SUITE_ENSEMBLES,
            noise_std_fraction=SUITE_NOISE_FRACTION,
            master_seed=seed,
        ),
        engine=engine,
        seed=seed,
        cv_row_cap=SUITE_CV_ROW_CAP,
    )


def _run_cell(preset: str, engine: str, seed: int, length: int, step_cap: int):
    ts = PRESETS[preset](length, seed)
    config = suite_forecast_config(engine, seed)
    with_mape = preset == "load"
    reports = []
    for scenario in SCENARIOS:
        try:
            reports.append(
                run_scenario(
                    scenario, ts, config,
                    step_cap=step_cap,
                    redecompose_window=SUITE_WINDOW if scenario == "II" else None,
                    with_mape=with_mape,
                    preset=preset,
                )
            )
        except ModecastError as exc:
            logger.error("cell (%s, %s, %d) scenario %s failed: %s",
                         preset, engine, seed, scenario, exc)
            reports.append(
                ScenarioReport(
                    scenario=scenario, engine=engine, preset=preset, seed=seed,
                    steps=0, rmse=math.nan, mape=None, runtime_seconds=0.0,
                    config=config_snapshot(config), error=str(exc),
                )
            )
    return reports


def run_benchmark_suite(
    presets,
    engines,
    seeds,
    length: int = SUITE_LENGTH,
    step_cap: int = SUITE_STEP_CAP,
    threads: int = 1,
) -> list[ScenarioReport]:
    """Cross product of presets x engines x scenarios x seeds.

    Cells are independent; report order is deterministic regardless of how
    they were scheduled.
    """
    if not presets or not engines or not seeds:
        raise InputError("presets, engines, and seeds must be non-empty")
    for preset in presets:
        if preset not in PRESETS:
            raise InputError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    cells = [(p, e, s) for p in presets for e in engines for s in seeds]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(
                pool.map(_run_cell_star, [(c, length, step_cap) for c in cells])
            )
    else:
        batches = [_run_cell(p, e, s, length, step_cap) for (p, e, s) in cells]
    return [report for batch in batches for report in batch]


def _run_cell_star(args):
    (preset, engine, seed), length, step_cap = args
    return _run_cell(preset, engine, seed, length, step_cap)


def reports_to_json(reports) -> str:
    """Deterministic JSON array of reports (timings live in the text table)."""
    return json.dumps([r.payload() for r in reports], indent=2) + "\n"


def render_table(reports) -> str:
    """Plain-text table in the engine/scenario layout of the result tables."""
    lines = []
    presets = []
    for r in reports:
        if r.preset not in presets:
            presets.append(r.preset)
    for preset in presets:
        rows = [r for r in reports if r.preset == preset]
        show_mape = any(r.mape is not None for r in rows)
        title = f"{preset or 'series'} forecasting"
        lines.append(title)
        header = f"{'Prediction Engine':<18}{'Scenario':<10}"
        header += f"{'MAPE':>10}" if show_mape else ""
        header += f"{'RMSE':>12}{'Runtime (s)':>13}{'Seed':>6}"
        lines.append(header)
        lines.append("-" * len(header))
        engines = []
        for r in rows:
            if r.engine not in engines:
                engines.append(r.engine)
        for engine in engines:
            for r in rows:
                if r.engine != engine:
                    continue
                cell = f"{engine:<18}{r.scenario:<10}"
                if show_mape:
                    cell += f"{r.mape:>10.4f}" if r.mape is not None else f"{'-':>10}"
                if r.error is None:
                    cell += f"{r.rmse:>12.4f}{r.runtime_seconds:>13.1f}{r.seed:>6}"
                else:
                    cell += f"{'failed':>12}{r.runtime_seconds:>13.1f}{r.seed:>6}"
                lines.append(cell)
        lines.append("")
    return "\n".join(lines)


def write_boundary_csv(path, divergence: BoundaryDivergence) -> None:
    """Long-format rows ``imf_index,sample_offset,divergence``."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("imf_index,sample_offset,divergence\n")
        for imf_index, values in enumerate(divergence.per_imf_divergence, start=1):
            for offset, value in enumerate(values):
                fh.write(f"{imf_index},{offset},{float(value)!r}\n")


def write_forecast_csv(path, ts: TimeSeries, walk: ScenarioWalk) -> None:
    """``timestamp,actual,forecast,component_1..M`` rows over the walked steps."""
    stamps = ts.timestamps()
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        names = ",".join(f"component_{i + 1}" for i in range(len(walk.component_names)))
        fh.write(f"timestamp,actual,forecast,{names}\n")
        for t in range(walk.actuals.size):
            stamp = stamps[walk.start_index + t].strftime("%Y-%m-%dT%H:%M:%SZ")
            parts = ",".join(repr(float(v)) for v in walk.component_predictions[t])
            fh.write(f"{stamp},{float(walk.actuals[t])!r},{float(walk.forecasts[t])!r},{parts}\n")
