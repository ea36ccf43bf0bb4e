"""Experiment configuration and the dataset x model runner."""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import __version__, arima, data, synth
from .codec import ScalingConfig, ScalingState
from .core import TimeSeries, mae, mse, train_test_split
from .errors import ConfigError, ExperimentFailure, InvalidArgument, WorkbenchError
from .forecaster import ArimaSettings, LlmtimeConfig, arima_forecast, llmtime_forecast
from .llm import ProviderSettings, build_provider

logger = logging.getLogger(__name__)

MODELS = ("llmtime", "arima")
REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SynthEntry:
    name: str
    spec: synth.SynthSpec
    horizon: int
    arima: Optional[ArimaSettings] = None


@dataclass
class ExperimentConfig:
    datasets: List[data.DatasetEntry] = field(default_factory=list)
    synth: List[SynthEntry] = field(default_factory=list)
    models: Tuple[str, ...] = ("arima",)
    llmtime: LlmtimeConfig = LlmtimeConfig()
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    arima: ArimaSettings = ArimaSettings()
    output_dir: Path = Path("out")
    cache_dir: Optional[Path] = None
    seed: int = 0
    parallelism: int = 1
    echo: dict = field(default_factory=dict)

    def validate(self):
        if not self.models:
            raise ConfigError("at least one model is required")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ConfigError(f"unknown models {bad}; choose from {list(MODELS)}")
        if not self.datasets and not self.synth:
            raise ConfigError("at least one dataset or synthetic series is required")
        names = [d.name for d in self.datasets] + [s.name for s in self.synth]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"duplicate dataset names {dupes}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


@dataclass
class ReportRow:
    dataset: str
    model: str
    horizon: int
    mse: Optional[float] = None
    mae: Optional[float] = None
    model_label: str = ""
    runtime_ms: float = 0.0
    num_invalid: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        # runtime is kept out of the report file so reruns are byte-identical
        return {
            "dataset": self.dataset, "model": self.model, "horizon": self.horizon,
            "mse": self.mse, "mae": self.mae, "model_label": self.model_label,
            "num_invalid": self.num_invalid, "error": self.error,
        }


@dataclass
class Trace:
    dataset: str
    model: str
    t: np.ndarray
    actual: np.ndarray
    split_index: int
    predicted: np.ndarray  # length == horizon, aligned with t[split_index:]
    samples: Optional[np.ndarray] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset, "model": self.model, "split_index": self.split_index,
            "t": self.t.tolist(), "actual": self.actual.tolist(),
            "predicted": self.predicted.tolist(),
            "samples": self.samples.tolist() if self.samples is not None else None,
            "details": self.details,
        }


@dataclass
class ExperimentReport:
    rows: List[ReportRow]
    traces: List[Trace]
    config_echo: dict
    versions: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "versions": self.versions,
            "config_echo": self.config_echo,
            "rows": [r.to_dict() for r in self.rows],
            "traces": [t.to_dict() for t in self.traces],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    def timings(self) -> dict:
        return {f"{r.dataset}/{r.model}": r.runtime_ms for r in self.rows}


# --- presets ------------------------------------------------------------------

_STATIONARY = ArimaSettings(max_d=0)


def preset_entries(name: str, seed: int) -> List[SynthEntry]:
    """Named sigma sweeps over the artificial signals (500 points on [0, 8pi], last 100 held out)."""
    def entry(kind, sigma, arima_settings):
        spec = synth.SynthSpec(kind=kind, sigma=sigma, n_points=500, t_start=0.0,
                               t_end=8 * math.pi, seed=seed)
        return SynthEntry(f"{kind}_sigma{sigma:g}", spec, 100, arima_settings)

    if name == "almost_periodic_sweep":
        return [entry("almost_periodic", s, _STATIONARY) for s in synth.ALMOST_PERIODIC_SIGMAS]
    if name == "sine_sweep":
        return [entry("sine", s, _STATIONARY) for s in synth.SINE_SIGMAS]
    if name == "sine_trend":
        return [entry("sine_plus_trend", synth.SINE_TREND_SIGMA, None)]
    raise ConfigError(f"unknown preset {name!r}")


PRESETS = ("almost_periodic_sweep", "sine_sweep", "sine_trend")


# --- config parsing -----------------------------------------------------------

def _arima_settings(d: dict, base: ArimaSettings = ArimaSettings()) -> ArimaSettings:
    known = {"order", "max_p", "max_d", "max_q", "enforce_stationarity", "max_iter", "ftol"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown arima keys {sorted(unknown)}")
    try:
        order = base.order
        if "order" in d:
            order = arima.ArimaOrder(*d["order"]) if d["order"] is not None else None
        opts = replace(
            base.options,
            enforce_stationarity=bool(d.get("enforce_stationarity", base.options.enforce_stationarity)),
            max_iter=int(d.get("max_iter", base.options.max_iter)),
            ftol=float(d.get("ftol", base.options.ftol)),
        )
        return ArimaSettings(order, int(d.get("max_p", base.max_p)), int(d.get("max_d", base.max_d)),
                             int(d.get("max_q", base.max_q)), opts)
    except (TypeError, InvalidArgument) as exc:
        raise ConfigError(f"bad arima settings: {exc}") from exc


def _llmtime_settings(d: dict) -> Tuple[LlmtimeConfig, ProviderSettings]:
    d = dict(d)
    provider = ProviderSettings(**d.pop("provider", {}))
    scaling = ScalingConfig(
        alpha=float(d.pop("alpha", 0.99)), beta=float(d.pop("beta", 0.3)),
        precision=int(d.pop("precision", 3)),
    )
    fixed = d.pop("fixed_scaling", None)
    fixed_state = None
    if fixed is not None:
        fixed_state = ScalingState(float(fixed.get("offset", 0.0)), float(fixed.get("scale", 1.0)),
                                   ScalingConfig(1.0, 0.0, scaling.precision))
    return LlmtimeConfig(scaling=scaling, fixed_scaling=fixed_state, **d), provider


def _synth_entry(d: dict, seed: int, arima_base: ArimaSettings) -> SynthEntry:
    d = dict(d)
    horizon = int(d.pop("horizon", 100))
    override = d.pop("arima", None)
    name = d.pop("name", None)
    d.setdefault("seed", seed)
    spec = synth.SynthSpec(**d)
    settings = _arima_settings(override, arima_base) if override is not None else None
    return SynthEntry(name or spec.label, spec, horizon, settings)


def config_from_dict(doc: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from parsed JSON."""
    known = {"datasets", "synth", "presets", "models", "llmtime", "arima",
             "output_dir", "cache_dir", "seed", "parallelism"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        seed = int(doc.get("seed", 0))
        arima_settings = _arima_settings(doc.get("arima", {}))
        llm_cfg, provider = _llmtime_settings(doc.get("llmtime", {}))
        entries = data.registry_from_dicts(doc.get("datasets", []), base_dir)
        synth_entries = [_synth_entry(s, seed, arima_settings) for s in doc.get("synth", [])]
        for name in doc.get("presets", []):
            synth_entries.extend(preset_entries(name, seed))
        out = Path(doc.get("output_dir", "out"))
        cache = doc.get("cache_dir")
        config = ExperimentConfig(
            datasets=entries,
            synth=synth_entries,
            models=tuple(doc.get("models", ())),
            llmtime=llm_cfg,
            provider=provider,
            arima=arima_settings,
            output_dir=out if out.is_absolute() else base_dir / out,
            cache_dir=(Path(cache) if Path(cache).is_absolute() else base_dir / cache) if cache else None,
            seed=seed,
            parallelism=int(doc.get("parallelism", 1)),
            echo=doc,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, InvalidArgument) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc, path.parent)


def filter_config(config: ExperimentConfig, only_dataset: Optional[str] = None,
                  only_model: Optional[str] = None) -> ExperimentConfig:
    out = replace(config)
    if only_dataset is not None:
        out.datasets = [d for d in config.datasets if d.name == only_dataset]
        out.synth = [s for s in config.synth if s.name == only_dataset]
        if not out.datasets and not out.synth:
            raise ConfigError(f"no dataset named {only_dataset!r}")
    if only_model is not None:
        if only_model not in config.models:
            raise ConfigError(f"model {only_model!r} is not in the config")
        out.models = (only_model,)
    return out


def resolved_echo(config: ExperimentConfig) -> dict:
    return {
        "models": list(config.models),
        "datasets": [
            {"name": d.name, "path": str(d.path), "horizon": d.horizon,
             "value_column": d.value_column, "time_column": d.time_column,
             "missing_policy": d.missing_policy.value}
            for d in config.datasets
        ],
        "synth": [
            {"name": s.name, "kind": s.spec.kind.value, "sigma": s.spec.sigma,
             "n_points": s.spec.n_points, "t_start": s.spec.t_start, "t_end": s.spec.t_end,
             "seed": s.spec.seed, "horizon": s.horizon,
             "arima": _arima_echo(s.arima) if s.arima else None}
            for s in config.synth
        ],
        "arima": _arima_echo(config.arima),
        "llmtime": {
            "alpha": config.llmtime.scaling.alpha, "beta": config.llmtime.scaling.beta,
            "precision": config.llmtime.scaling.precision,
            "num_samples": config.llmtime.num_samples, "temperature": config.llmtime.temperature,
            "tokens_per_value_estimate": config.llmtime.tokens_per_value_estimate,
            "safety_factor": config.llmtime.safety_factor,
            "min_valid_samples": config.llmtime.min_valid_samples,
            "model_name": config.llmtime.model_name,
            "fixed_scaling": (
                {"offset": config.llmtime.fixed_scaling.offset, "scale": config.llmtime.fixed_scaling.scale}
                if config.llmtime.fixed_scaling else None
            ),
            "provider": {"kind": config.provider.kind, "mock_rule": config.provider.mock_rule,
                         "base_url": config.provider.base_url},
        },
        "seed": config.seed,
    }


def _arima_echo(s: ArimaSettings) -> dict:
    return {
        "order": list(s.order.as_tuple()) if s.order else None,
        "max_p": s.max_p, "max_d": s.max_d, "max_q": s.max_q,
        "enforce_stationarity": s.options.enforce_stationarity,
        "max_iter": s.options.max_iter, "ftol": s.options.ftol,
    }


# --- running ------------------------------------------------------------------

@dataclass
class _Cell:
    dataset: str
    model: str
    series: Optional[TimeSeries]
    horizon: int
    arima: ArimaSettings
    load_error: Optional[str] = None


def _describe(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _load_cells(config: ExperimentConfig) -> List[_Cell]:
    cells = []
    for entry in config.datasets:
        try:
            series = data.load_csv(entry)
            horizon, err = entry.resolved_horizon(len(series)), None
        except WorkbenchError as exc:
            series, horizon, err = None, entry.horizon or 0, _describe(exc)
        for model in config.models:
            cells.append(_Cell(entry.name, model, series, horizon, config.arima, err))
    for s in config.synth:
        series = synth.generate(s.spec)
        for model in config.models:
            cells.append(_Cell(s.name, model, series, s.horizon, s.arima or config.arima))
    return cells


def _run_cell(cell: _Cell, config: ExperimentConfig, provider):
    row = ReportRow(cell.dataset, cell.model, cell.horizon)
    if cell.load_error:
        row.error = cell.load_error
        return row, None
    start = time.perf_counter()
    try:
        split = train_test_split(cell.series, cell.horizon)
        if cell.model == "arima":
            result = arima_forecast(split.train, cell.horizon, settings=cell.arima)
        else:
            result = llmtime_forecast(split.train, cell.horizon, config.llmtime, provider)
        row.mse = mse(result.point, split.test.values)
        row.mae = mae(result.point, split.test.values)
        row.model_label = result.model_label
        row.num_invalid = result.num_invalid
        trace = Trace(
            cell.dataset, cell.model, cell.series.timestamps.copy(), cell.series.values.copy(),
            len(split.train), np.asarray(result.point, dtype=float),
            result.samples if cell.model == "llmtime" else None, result.details,
        )
    except Exception as exc:  # failures are recorded per cell, never abort the sweep
        logger.warning("%s/%s failed: %s", cell.dataset, cell.model, exc)
        row.error = _describe(exc)
        num_invalid = getattr(exc, "num_invalid", None)
        if num_invalid is not None:
            row.num_invalid = num_invalid
        trace = None
    row.runtime_ms = (time.perf_counter() - start) * 1000.0
    return row, trace


def run(config: ExperimentConfig, provider=None) -> ExperimentReport:
    """Split every series, forecast with every model, score against the held-out tail.

    ``provider`` overrides the one built from ``config.provider``. Raises
    :class:`ExperimentFailure` only when no cell succeeds.
    """
    config.validate()
    if provider is None and "llmtime" in config.models:
        provider = build_provider(config.provider, config.cache_dir)
    cells = _load_cells(config)
    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(lambda c: _run_cell(c, config, provider), cells))
    else:
        results = [_run_cell(c, config, provider) for c in cells]
    rows = [r for r, _ in results]
    traces = [t for _, t in results if t is not None]
    report = ExperimentReport(
        rows, traces, resolved_echo(config),
        {"llmtime_bench": __version__, "report_schema": REPORT_SCHEMA_VERSION},
    )
    if not any(r.ok for r in rows):
        err = ExperimentFailure(f"all {len(rows)} runs failed; first error: {rows[0].error}")
        err.report = report
        raise err
    return report

