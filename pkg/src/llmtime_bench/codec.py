"""Digit-level serialisation of numeric series for completion prompts.

Values are shifted by a low quantile, divided by a high quantile, truncated to
a fixed number of decimals and written as space-separated digits with the
decimal point dropped. Consecutive values are separated by ``" , "``::

    [0.789, 7.89, 78.9, 789.0], precision 2  ->  "7 8 , 7 8 9 , 7 8 9 0 , 7 8 9 0 0"
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DecodeFailure, InvalidArgument, TuningFailure

VALUE_SEP = " , "
DIGIT_SEP = " "
MINUS = "-"
MIN_SCALE = 1e-12
# relative tolerance for snapping x * 10**P onto an integer before truncating
SNAP_RTOL = 1e-9


@dataclass(frozen=True)
class ScalingConfig:
    alpha: float = 0.99
    beta: float = 0.3
    precision: int = 3

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise InvalidArgument(f"beta must lie in [0, 1), got {self.beta}")
        if int(self.precision) != self.precision or self.precision < 0:
            raise InvalidArgument("precision must be a nonnegative integer")


DEFAULT_GRID = tuple(
    ScalingConfig(alpha=a, beta=b)
    for a in (0.5, 0.7, 0.9, 0.99)
    for b in (0.0, 0.15, 0.3)
)


@dataclass(frozen=True)
class ScalingState:
    offset: float
    scale: float
    config: ScalingConfig = ScalingConfig()

    def __post_init__(self):
        if not self.scale >= MIN_SCALE:
            raise InvalidArgument(f"scale must be >= {MIN_SCALE}, got {self.scale}")

    @classmethod
    def identity(cls, precision: int = 3) -> "ScalingState":
        return cls(0.0, 1.0, ScalingConfig(alpha=1.0, beta=0.0, precision=precision))

    @property
    def precision(self) -> int:
        return self.config.precision

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.offset) / self.scale

    def inverse(self, scaled) -> np.ndarray:
        return np.asarray(scaled, dtype=float) * self.scale + self.offset


@dataclass(frozen=True)
class EncodedSeries:
    text: str
    state: ScalingState
    count: int


def fit_scaling(train_values, config: ScalingConfig = ScalingConfig()) -> ScalingState:
    """Offset is the ``beta``-quantile; scale is the ``alpha``-quantile after shifting.

    Quantiles interpolate linearly between order statistics. A scale at or
    below ``MIN_SCALE`` (e.g. constant input) falls back to 1.
    """
    x = np.asarray(train_values, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidArgument("cannot fit scaling on an empty series")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("scaling input must be finite")
    offset = float(np.quantile(x, config.beta))
    scale = float(np.quantile(x - offset, config.alpha))
    if not scale > MIN_SCALE:
        scale = 1.0
    return ScalingState(offset, scale, config)


def truncated_digits(magnitude: float, precision: int) -> int:
    """``floor(magnitude * 10**precision)`` as an int, for ``magnitude >= 0``.

    Products within ``SNAP_RTOL`` of an integer are snapped to it first so
    that binary round-off (0.29 * 100 == 28.999...) does not drop a digit.
    """
    shifted = magnitude * 10.0 ** precision
    nearest = round(shifted)
    if abs(shifted - nearest) <= SNAP_RTOL * max(1.0, abs(shifted)):
        return int(nearest)
    return int(math.floor(shifted))


def truncate(value: float, precision: int) -> float:
    """The value ``encode`` actually transmits, on the scaled axis."""
    digits = truncated_digits(abs(value), precision)
    out = digits / 10.0 ** precision
    return -out if value < 0 and digits else out


def _encode_one(value: float, precision: int) -> str:
    digits = truncated_digits(abs(value), precision)
    body = DIGIT_SEP.join(str(digits))
    if value < 0 and digits:
        return MINUS + DIGIT_SEP + body
    return body


def encode(values, state: ScalingState) -> EncodedSeries:
    scaled = state.transform(values).reshape(-1)
    if not np.all(np.isfinite(scaled)):
        raise InvalidArgument("cannot encode non-finite values")
    text = VALUE_SEP.join(_encode_one(float(v), state.precision) for v in scaled)
    return EncodedSeries(text, state, int(scaled.size))


def decode_scaled(text: str, precision: int, max_values: Optional[int] = None) -> list:
    """Parse ``text`` into scaled-axis values, stopping at the first bad character.

    Whitespace is ignored. A value is complete once it is followed by a comma
    or the end of the text; a value interrupted by an invalid character is
    dropped.
    """
    out = []
    digits = ""
    negative = False
    for ch in text:
        if max_values is not None and len(out) >= max_values:
            return out
        if ch.isspace():
            continue
        if "0" <= ch <= "9":
            digits += ch
        elif ch == MINUS and not digits and not negative:
            negative = True
        elif ch == "," and digits:
            out.append(_assemble(digits, negative, precision))
            digits, negative = "", False
        else:
            return out
    if digits and (max_values is None or len(out) < max_values):
        out.append(_assemble(digits, negative, precision))
    return out


def _assemble(digits: str, negative: bool, precision: int) -> float:
    v = int(digits) / 10.0 ** precision
    return -v if negative else v


def decode(text: str, state: ScalingState, max_values: Optional[int] = None) -> np.ndarray:
    """Inverse of :func:`encode`; raises :class:`DecodeFailure` on zero values."""
    scaled = decode_scaled(text, state.precision, max_values)
    if not scaled:
        raise DecodeFailure(f"no parseable value in {text[:40]!r}")
    return state.inverse(scaled)


Scorer = Callable[[np.ndarray, np.ndarray, ScalingConfig], float]


def tune_scaling(train, validation, grid: Sequence[ScalingConfig], scorer: Scorer) -> ScalingConfig:
    """Return the grid entry with the highest score on ``validation``.

    ``scorer(train, validation, config)`` returns a score to maximise, or
    raises / returns a non-finite value when that config is unusable. Ties go
    to the earliest grid entry.
    """
    grid = list(grid)
    if not grid:
        raise InvalidArgument("tuning grid is empty")
    train = np.asarray(train, dtype=float)
    validation = np.asarray(validation, dtype=float)
    best, best_score = None, -math.inf
    errors = []
    for config in grid:
        try:
            score = float(scorer(train, validation, config))
        except Exception as exc:  # one bad config must not sink the search
            errors.append(exc)
            continue
        if math.isfinite(score) and (best is None or score > best_score):
            best, best_score = config, score
    if best is None:
        raise TuningFailure(f"all {len(grid)} scaling configs failed: {errors[:1]}")
    return best

