"""Command-line surface: decompose, diagnose, forecast, benchmark, boundary.

Options resolve in three layers, rightmost winning: built-in defaults, then
a flat ``key = value`` config file, then command-line flags. Every run
writes ``run_manifest.json`` with the full effective configuration so it can
be reproduced bit-exactly. Exit codes: 0 success, 1 usage error, 2 input
data error, 3 computation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    SUITE_LENGTH,
    SUITE_STEP_CAP,
    boundary_divergence,
    render_table,
    reports_to_json,
    run_benchmark_suite,
    run_scenario,
    scenario_walk,
    write_boundary_csv,
    write_forecast_csv,
)
from .emd import BoundaryPolicy, SiftConfig, decompose, write_decomposition_csv
from .ensemble import EnsembleConfig, ceemd, eemd, write_ensemble_metadata
from .exceptions import CsvFormatError, InputError, ModecastError
from .features import write_selected_lags
from .pipeline import ForecastConfig
from .predict import model_to_dict
from .series import PRESETS, TimeSeries, load_csv, save_csv, synth_generate, SynthSpec
from .spectral import pacf, stft, write_pacf_csv, write_spectrogram_csv


class UsageError(Exception):
    """Bad flags or option values; reported with a usage hint."""


@dataclass(frozen=True)
class CliConfig:
    command: str
    options: dict


# (name, type, default, help). Options whose default is the sentinel
# _REQUIRED must come from the config file or the command line.
_REQUIRED = object()

_COMMON = [
    ("output_dir", str, ".", "directory for all output files"),
    ("config", str, None, "flat key = value config file"),
]

_SERIES_SOURCE = [
    ("input", str, None, "input series CSV (timestamp,value)"),
    ("preset", str, None, "synthetic preset name (load or wind)"),
    ("length", int, 2000, "synthetic series length"),
]

_COMMANDS: dict[str, list] = {
    "synth": [
        ("preset", str, "load", "synthetic preset name (load or wind)"),
        ("length", int, 2000, "series length in hours"),
        ("seed", int, _REQUIRED, "generator seed"),
    ],
    "decompose": [
        ("input", str, _REQUIRED, "input series CSV"),
        ("method", str, "emd", "emd, eemd, or ceemd"),
        ("ne", int, 100, "ensemble count for eemd/ceemd"),
        ("noise_fraction", float, 0.2, "noise std as a fraction of input std"),
        ("seed", int, None, "master seed (required for eemd/ceemd)"),
        ("epsilon", float, None, "sifting stop threshold (default: 1e-4 x std)"),
        ("max_imfs", int, None, "mode cap (default: floor(log2 N))"),
        ("max_sift", int, 10, "sifting iteration cap"),
        ("boundary", str, "linear", "boundary policy: linear, mirror, or clamp"),
    ],
    "spectral": [
        ("input", str, _REQUIRED, "input CSV"),
        ("column", str, "value", "column to analyze"),
        ("window", int, 256, "window length (even)"),
        ("hop", int, 64, "hop between frames"),
    ],
    "pacf": [
        ("input", str, _REQUIRED, "input CSV"),
        ("column", str, "value", "column to analyze"),
        ("max_lag", int, 48, "largest lag"),
    ],
    "forecast": _SERIES_SOURCE + [
        ("scenario", str, "II", "evaluation protocol: I, II, or III"),
        ("method", str, "ceemd", "decomposition: emd, eemd, ceemd, or none"),
        ("engine", str, "elm", "prediction engine: elm or svr"),
        ("ne", int, 8, "ensemble count"),
        ("noise_fraction", float, 0.2, "ensemble noise fraction"),
        ("seed", int, _REQUIRED, "seed for noise and engine init"),
        ("steps", int, None, "test steps to walk (default: whole test part)"),
        ("window", int, None, "re-decomposition window for scenario II"),
    ],
    "scenario": _SERIES_SOURCE + [
        ("scenario", str, "II", "evaluation protocol: I, II, or III"),
        ("method", str, "ceemd", "decomposition: emd, eemd, ceemd, or none"),
        ("engine", str, "elm", "prediction engine: elm or svr"),
        ("ne", int, 8, "ensemble count"),
        ("noise_fraction", float, 0.2, "ensemble noise fraction"),
        ("seed", int, _REQUIRED, "seed for noise and engine init"),
        ("steps", int, None, "test steps to walk"),
        ("window", int, None, "re-decomposition window for scenario II"),
    ],
    "suite": [
        ("presets", str, "load,wind", "comma-separated preset names"),
        ("engines", str, "elm,svr", "comma-separated engines"),
        ("seeds", str, _REQUIRED, "comma-separated seeds"),
        ("length", int, SUITE_LENGTH, "series length per cell"),
        ("steps", int, SUITE_STEP_CAP, "test steps per scenario"),
        ("threads", int, 0, "worker processes (0 = machine parallelism)"),
    ],
    "boundary": _SERIES_SOURCE + [
        ("seed", int, None, "seed (required with --preset)"),
        ("lookahead", int, 48, "future samples withheld from the truncated run"),
        ("window", int, 48, "comparison window length"),
    ],
}


def _build_parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            raise UsageError(message)

    parser = Parser(prog="modecast", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")
    for command, spec in _COMMANDS.items():
        p = sub.add_parser(command, add_help=True)
        for name, kind, default, help_text in spec + _COMMON:
            flag = "--" + name.replace("_", "-")
            p.add_argument(flag, type=kind, default=None, help=help_text)
    return parser


def _read_config_file(path: Path) -> dict:
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _needs_seed(command: str, options: dict) -> bool:
    if command in ("synth", "forecast", "scenario"):
        return True
    if command == "decompose":
        return options.get("method") in ("eemd", "ceemd")
    if command == "boundary":
        return options.get("preset") is not None
    return False


def parse_args(argv) -> CliConfig:
    """Merge defaults, config file, and flags; validate before dispatch."""
    parser = _build_parser()
    namespace = parser.parse_args(argv)
    if namespace.command is None:
        raise UsageError(parser.format_usage().strip())
    spec = _COMMANDS[namespace.command] + _COMMON
    types = {name: kind for name, kind, _, _ in spec}

    options = {name: default for name, _, default, _ in spec}
    if namespace.config is not None:
        for key, value in _read_config_file(Path(namespace.config)).items():
            if key not in types:
                raise UsageError(f"unknown config key {key!r} for {namespace.command}")
            try:
                options[key] = types[key](value)
            except ValueError:
                raise UsageError(f"bad value for config key {key!r}: {value!r}") from None
    for name in types:
        supplied = getattr(namespace, name)
        if supplied is not None:
            options[name] = supplied

    missing = [name for name, value in options.items() if value is _REQUIRED]
    if missing:
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise UsageError(f"{namespace.command}: missing required option(s): {flags}")
    _validate(namespace.command, options)
    return CliConfig(command=namespace.command, options=options)


def _check(condition: bool, message: str):
    if not condition:
        raise UsageError(message)


def _validate(command: str, o: dict) -> None:
    if "ne" in o:
        _check(o["ne"] >= 1, "--ne must be at least 1")
    if o.get("method") == "ceemd" and "ne" in o:
        _check(o["ne"] % 2 == 0, "--ne must be even for ceemd")
    if "noise_fraction" in o:
        _check(o["noise_fraction"] >= 0, "--noise-fraction must be non-negative")
    if "length" in o:
        _check(o["length"] >= 2, "--length must be at least 2")
    if o.get("steps") is not None:
        _check(o["steps"] >= 1, "--steps must be at least 1")
    if o.get("epsilon") is not None:
        _check(o["epsilon"] > 0, "--epsilon must be positive")
    if o.get("max_imfs") is not None:
        _check(o["max_imfs"] >= 1, "--max-imfs must be at least 1")
    if "max_sift" in o:
        _check(o["max_sift"] >= 1, "--max-sift must be at least 1")
    if "window" in o and command in ("spectral",):
        _check(o["window"] >= 2 and o["window"] % 2 == 0, "--window must be even")
    if o.get("window") is not None and command in ("forecast", "scenario", "boundary"):
        _check(o["window"] >= 1, "--window must be at least 1")
    if "hop" in o:
        _check(o["hop"] >= 1, "--hop must be at least 1")
    if "max_lag" in o:
        _check(o["max_lag"] >= 0, "--max-lag must be non-negative")
    if "lookahead" in o:
        _check(o["lookahead"] >= 0, "--lookahead must be non-negative")
    if "threads" in o:
        _check(o["threads"] >= 0, "--threads must be non-negative")
    if "boundary" in o:
        policies = [p.value for p in BoundaryPolicy]
        _check(o["boundary"] in policies, f"--boundary must be one of {policies}")
    if "method" in o:
        allowed = ("emd", "eemd", "ceemd") + (("none",) if command != "decompose" else ())
        _check(o["method"] in allowed, f"--method must be one of {allowed}")
    if "engine" in o:
        _check(o["engine"] in ("elm", "svr"), "--engine must be elm or svr")
    if "scenario" in o:
        _check(o["scenario"] in ("I", "II", "III"), "--scenario must be I, II, or III")
    if "preset" in o and o["preset"] is not None:
        _check(o["preset"] in PRESETS, f"--preset must be one of {sorted(PRESETS)}")
    if command in ("forecast", "scenario", "boundary"):
        _check(
            (o.get("input") is not None) != (o.get("preset") is not None),
            "provide exactly one of --input or --preset",
        )
    if _needs_seed(command, o):
        _check(o.get("seed") is not None, "this command is randomized; --seed is required")


def _write_manifest(out_dir: Path, config: CliConfig) -> None:
    manifest = {
        "command": config.command,
        "options": {k: v for k, v in config.options.items() if k != "config"},
        "version": __version__,
    }
    with (out_dir / "run_manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_series(options: dict) -> TimeSeries:
    if options.get("input") is not None:
        return load_csv(options["input"])
    return PRESETS[options["preset"]](options["length"], options["seed"])


def _read_column(path, column: str) -> np.ndarray:
    """Read one numeric column from a header-carrying CSV (e.g. an exported
    decomposition); the plain two-column series format is the common case."""
    path = Path(path)
    if not path.exists():
        raise CsvFormatError(f"no such file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if column not in header:
            raise CsvFormatError(f"column {column!r} not in header {header}", line=1)
        idx = header.index(column)
        values = []
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            try:
                values.append(float(parts[idx]))
            except (IndexError, ValueError):
                raise CsvFormatError(f"bad row for column {column!r}", line=lineno) from None
    if not values:
        raise CsvFormatError("file contains no data rows")
    return np.asarray(values)


def _sift_config(o: dict) -> SiftConfig:
    return SiftConfig(
        epsilon=o.get("epsilon"),
        max_sift_iterations=o.get("max_sift", 10),
        max_imfs=o.get("max_imfs"),
        boundary_policy=BoundaryPolicy(o.get("boundary", "linear")),
    )


def _forecast_config(o: dict) -> ForecastConfig:
    return ForecastConfig(
        method=o["method"].upper(),
        ensemble=EnsembleConfig(
            num_ensembles=o["ne"],
            noise_std_fraction=o["noise_fraction"],
            master_seed=o["seed"],
        ),
        engine=o["engine"].upper(),
        seed=o["seed"],
    )


def dispatch(config: CliConfig) -> int:
    """Run the selected command, writing outputs under ``--output-dir``."""
    o = config.options
    out_dir = Path(o["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, config)

    if config.command == "synth":
        ts = PRESETS[o["preset"]](o["length"], o["seed"])
        save_csv(ts, out_dir / "series.csv")
        print(f"wrote {out_dir / 'series.csv'} ({len(ts)} samples)")

    elif config.command == "decompose":
        ts = load_csv(o["input"])
        sift = _sift_config(o)
        if o["method"] == "emd":
            d = decompose(ts.values, sift)
        else:
            ens = EnsembleConfig(
                num_ensembles=o["ne"],
                noise_std_fraction=o["noise_fraction"],
                master_seed=o["seed"],
                sift=sift,
            )
            d = eemd(ts, ens) if o["method"] == "eemd" else ceemd(ts, ens)
        write_decomposition_csv(out_dir / "decomposition.csv", ts, d)
        write_ensemble_metadata(out_dir / "decomposition_meta.json", d)
        print(f"{d.method}: {len(d.imfs)} modes + residual -> {out_dir / 'decomposition.csv'}")

    elif config.command == "spectral":
        values = _read_column(o["input"], o["column"])
        spec = stft(values, o["window"], o["hop"])
        write_spectrogram_csv(out_dir / "spectrogram.csv", spec)
        print(f"{spec.frame_count} frames x {spec.magnitudes.shape[1]} bins "
              f"-> {out_dir / 'spectrogram.csv'}")

    elif config.command == "pacf":
        values = _read_column(o["input"], o["column"])
        result = pacf(values, o["max_lag"])
        write_pacf_csv(out_dir / "pacf.csv", result)
        print(f"pacf up to lag {o['max_lag']} -> {out_dir / 'pacf.csv'}")

    elif config.command in ("forecast", "scenario"):
        ts = _load_series(o)
        fc = _forecast_config(o)
        if config.command == "forecast":
            walk = scenario_walk(o["scenario"], ts, fc, o["steps"], o["window"])
            write_forecast_csv(out_dir / "forecast.csv", ts, walk)
            models = []
            for comp in walk.model.components:
                write_selected_lags(
                    out_dir / f"selected_lags_{comp.label}.json",
                    comp.label, comp.lags, comp.relevance,
                    fc.mrmr_k, fc.mrmr_bins,
                )
                entry = model_to_dict(comp.engine, comp.model)
                entry["component"] = comp.label
                entry["lags"] = list(comp.lags)
                models.append(entry)
            with (out_dir / "models.json").open("w", encoding="utf-8", newline="\n") as fh:
                json.dump(models, fh)
                fh.write("\n")
            print(f"walked {walk.actuals.size} steps -> {out_dir / 'forecast.csv'}")
        else:
            with_mape = not np.any(ts.values == 0)
            report = run_scenario(
                o["scenario"], ts, fc, step_cap=o["steps"],
                redecompose_window=o["window"], with_mape=with_mape,
                preset=o.get("preset") or ts.name,
            )
            with (out_dir / "report.json").open("w", encoding="utf-8", newline="\n") as fh:
                json.dump(report.payload(), fh, indent=2)
                fh.write("\n")
            table = render_table([report])
            (out_dir / "table.txt").write_text(table, encoding="utf-8")
            print(table)

    elif config.command == "suite":
        threads = o["threads"] if o["threads"] > 0 else (os.cpu_count() or 1)
        reports = run_benchmark_suite(
            presets=[p.strip() for p in o["presets"].split(",") if p.strip()],
            engines=[e.strip().upper() for e in o["engines"].split(",") if e.strip()],
            seeds=[int(s) for s in o["seeds"].split(",") if s.strip()],
            length=o["length"],
            step_cap=o["steps"],
            threads=threads,
        )
        (out_dir / "suite_report.json").write_text(reports_to_json(reports), encoding="utf-8")
        table = render_table(reports)
        (out_dir / "suite_table.txt").write_text(table, encoding="utf-8")
        timings = {
            f"{r.preset}/{r.engine}/{r.scenario}/seed{r.seed}": r.runtime_seconds
            for r in reports
        }
        with (out_dir / "suite_timings.json").open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(timings, fh, indent=2)
            fh.write("\n")
        print(table)

    elif config.command == "boundary":
        ts = _load_series(o)
        divergence = boundary_divergence(ts, o["lookahead"], SiftConfig(), o["window"])
        write_boundary_csv(out_dir / "boundary.csv", divergence)
        print(f"{len(divergence.per_imf_divergence)} modes over window "
              f"{divergence.window} -> {out_dir / 'boundary.csv'}")

    else:
        raise UsageError(f"unknown command {config.command!r}")
    return 0


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_args(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run 'modecast --help' for usage", file=sys.stderr)
        return 1
    try:
        return dispatch(config)
    except CsvFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ModecastError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
