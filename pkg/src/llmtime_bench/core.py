"""Time-series container, splitting, differencing and error metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument


def _as_float_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Ordered ``(timestamp, value)`` sequence.

    Timestamps must be strictly increasing and values finite. Both are stored
    as read-only numpy arrays so instances can be shared freely.
    """

    timestamps: np.ndarray
    values: np.ndarray
    name: Optional[str] = None

    def __post_init__(self):
        ts = _as_float_array(self.timestamps)
        vs = _as_float_array(self.values)
        if ts.shape != vs.shape:
            raise InvalidArgument(
                f"timestamps ({ts.size}) and values ({vs.size}) differ in length"
            )
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise InvalidArgument("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vs)):
            bad = int(np.flatnonzero(~np.isfinite(vs))[0])
            raise InvalidArgument(f"non-finite value at position {bad}")
        if not np.all(np.isfinite(ts)):
            raise InvalidArgument("non-finite timestamp")
        ts.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    @classmethod
    def from_values(cls, values, name=None, start=0) -> "TimeSeries":
        vs = _as_float_array(values)
        return cls(np.arange(start, start + vs.size, dtype=float), vs, name)

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.name, self.timestamps.tobytes(), self.values.tobytes()))

    def slice(self, start=None, stop=None) -> "TimeSeries":
        return TimeSeries(self.timestamps[start:stop], self.values[start:stop], self.name)

    def concat(self, other: "TimeSeries") -> "TimeSeries":
        return TimeSeries(
            np.concatenate([self.timestamps, other.timestamps]),
            np.concatenate([self.values, other.values]),
            self.name,
        )


@dataclass(frozen=True)
class SplitSeries:
    train: TimeSeries
    test: TimeSeries

    def joined(self) -> TimeSeries:
        return self.train.concat(self.test)


def train_test_split(series: TimeSeries, horizon: int) -> SplitSeries:
    """Hold out the last ``horizon`` points as the test segment."""
    n = len(series)
    if int(horizon) != horizon or not 0 < horizon < n:
        raise InvalidArgument(f"horizon must satisfy 0 < horizon < {n}, got {horizon}")
    cut = n - int(horizon)
    return SplitSeries(series.slice(None, cut), series.slice(cut, None))


def difference(values: Sequence[float], d: int) -> np.ndarray:
    x = _as_float_array(values)
    if d < 0:
        raise InvalidArgument("d must be nonnegative")
    if x.size <= d:
        raise InvalidArgument(f"need more than {d} values to difference {d} times")
    return np.diff(x, n=d) if d else x.copy()


def integration_seeds(prefix: Sequence[float], d: int) -> np.ndarray:
    """Seeds for :func:`undifference` taken from the end of ``prefix``.

    ``seeds[k]`` is the last value of the ``k``-th difference of ``prefix``,
    so only the last ``d`` values of ``prefix`` matter.
    """
    x = _as_float_array(prefix)
    if x.size < d:
        raise InvalidArgument(f"need at least {d} values to seed integration")
    return np.array([np.diff(x, n=k)[-1] for k in range(d)], dtype=float)


def undifference(diffs: Sequence[float], seeds: Sequence[float], d: int) -> np.ndarray:
    """Invert :func:`difference` given one seed per integration level.

    ``seeds[k]`` is the last known value at difference level ``k`` (see
    :func:`integration_seeds`). Integration runs from level ``d - 1`` down to 0.
    """
    out = _as_float_array(diffs)
    s = _as_float_array(seeds)
    if s.size != d:
        raise InvalidArgument(f"expected {d} seeds, got {s.size}")
    for level in range(d - 1, -1, -1):
        out = s[level] + np.cumsum(out)
    return out


def _paired(predicted, actual):
    p = _as_float_array(predicted)
    a = _as_float_array(actual)
    if p.size != a.size:
        raise InvalidArgument(f"length mismatch: {p.size} vs {a.size}")
    if p.size == 0:
        raise InvalidArgument("metrics need at least one point")
    return p, a


def mse(predicted, actual) -> float:
    p, a = _paired(predicted, actual)
    return float(np.mean((p - a) ** 2))


def mae(predicted, actual) -> float:
    p, a = _paired(predicted, actual)
    return float(np.mean(np.abs(p - a)))
