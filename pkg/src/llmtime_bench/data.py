"""CSV ingestion, the CSV writer, and the dataset registry."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core import TimeSeries
from .errors import ConfigError, DataError, InvalidArgument, SchemaError

MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}
MAX_DEFAULT_HORIZON = 60
DEFAULT_HORIZON_FRACTION = 0.2
_EPOCH = date(1970, 1, 1)


class MissingPolicy(str, enum.Enum):
    ERROR = "error"
    FORWARD_FILL = "forward_fill"
    DROP = "drop"


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    path: Path
    horizon: Optional[int] = None  # None -> default_horizon(len(series))
    value_column: str = "value"
    time_column: Optional[str] = None
    missing_policy: MissingPolicy = MissingPolicy.ERROR

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        try:
            object.__setattr__(self, "missing_policy", MissingPolicy(self.missing_policy))
        except ValueError:
            raise ConfigError(f"{self.name}: unknown missing_policy {self.missing_policy!r}") from None
        if self.horizon is not None and (int(self.horizon) != self.horizon or self.horizon < 1):
            raise ConfigError(f"{self.name}: horizon must be a positive integer, got {self.horizon}")

    def resolved_horizon(self, length: int) -> int:
        return self.horizon if self.horizon is not None else default_horizon(length)


def default_horizon(length: int) -> int:
    """20% of the series, rounded, capped at 60 and at least 1."""
    return max(1, min(int(round(DEFAULT_HORIZON_FRACTION * length)), MAX_DEFAULT_HORIZON))


def _parse_value(raw: str) -> float:
    s = raw.strip()
    if s.lower() in MISSING_TOKENS:
        return math.nan
    return float(s)


def _parse_time(raw: str) -> float:
    """Integer index, plain number, or ISO-8601 date/datetime as epoch days."""
    s = raw.strip()
    try:
        return float(int(s))
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    try:
        d = date.fromisoformat(s)
        return float((d - _EPOCH).days)
    except ValueError:
        pass
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp() / 86400.0


def load_csv(entry: DatasetEntry) -> TimeSeries:
    """Read one series from ``entry.path``; row numbers in errors are 1-based data rows."""
    try:
        with open(entry.path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {entry.path}: {exc}") from exc
    if header is None:
        raise SchemaError(f"{entry.path} is empty")
    header = [h.strip() for h in header]
    if entry.value_column not in header:
        raise SchemaError(f"{entry.path}: no column {entry.value_column!r} in {header}")
    vi = header.index(entry.value_column)
    ti = None
    if entry.time_column is not None:
        if entry.time_column not in header:
            raise SchemaError(f"{entry.path}: no column {entry.time_column!r} in {header}")
        ti = header.index(entry.time_column)

    times, values = [], []
    last = None
    for rowno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            v = _parse_value(row[vi]) if vi < len(row) else math.nan
        except ValueError:
            raise DataError(f"{entry.path}: row {rowno}: bad value {row[vi]!r}") from None
        if not math.isfinite(v):
            if entry.missing_policy is MissingPolicy.ERROR:
                raise DataError(f"{entry.path}: missing value at row {rowno}")
            if entry.missing_policy is MissingPolicy.DROP:
                continue
            if last is None:
                raise DataError(f"{entry.path}: row {rowno}: nothing to forward-fill from")
            v = last
        if ti is not None:
            try:
                t = _parse_time(row[ti])
            except (ValueError, IndexError):
                raise DataError(f"{entry.path}: row {rowno}: bad timestamp") from None
        else:
            t = float(rowno - 1)
        times.append(t)
        values.append(v)
        last = v
    try:
        return TimeSeries(np.array(times), np.array(values), name=entry.name)
    except InvalidArgument as exc:
        raise DataError(f"{entry.path}: {exc}") from exc


def write_csv(series: TimeSeries, path) -> Path:
    """Write columns ``t,v`` with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v"])
        for t, v in zip(series.timestamps, series.values):
            w.writerow([f"{t:.17g}", f"{v:.17g}"])
    return path


def entry_from_dict(d: dict, base_dir: Path = Path(".")) -> DatasetEntry:
    if "name" not in d or "path" not in d:
        raise ConfigError(f"dataset entries need 'name' and 'path': {d}")
    unknown = set(d) - {"name", "path", "horizon", "value_column", "time_column", "missing_policy"}
    if unknown:
        raise ConfigError(f"{d['name']}: unknown dataset keys {sorted(unknown)}")
    path = Path(d["path"])
    if not path.is_absolute():
        path = base_dir / path
    return DatasetEntry(
        name=str(d["name"]),
        path=path,
        horizon=d.get("horizon"),
        value_column=d.get("value_column", "value"),
        time_column=d.get("time_column"),
        missing_policy=d.get("missing_policy", "error"),
    )


def registry_from_dicts(items, base_dir: Path = Path(".")) -> List[DatasetEntry]:
    entries = [entry_from_dict(d, base_dir) for d in items or []]
    seen = set()
    for e in entries:
        if e.name in seen:
            raise ConfigError(f"duplicate dataset name {e.name!r}")
        seen.add(e.name)
    return entries


def registry_from_config(config_path) -> List[DatasetEntry]:
    """Dataset entries from the ``datasets`` list of a bench JSON config.

    Relative paths resolve against the config file's directory.
    """
    config_path = Path(config_path)
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{config_path} is not valid JSON: {exc}") from exc
    return registry_from_dicts(doc.get("datasets", []), config_path.parent)
