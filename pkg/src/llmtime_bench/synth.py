"""Seeded generators for the artificial test signals.

Noise comes from SplitMix64, used here as a counter-based generator: the
``i``-th 64-bit output depends only on ``(seed, i)``, so the stream can be
produced in one vectorised pass and is identical on every platform. Uniforms
are turned into standard normals with the Box-Muller transform.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import TimeSeries
from .errors import InvalidArgument

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1

# sigma grids used by the bench presets
ALMOST_PERIODIC_SIGMAS = (0.0, 0.1, 0.2, 0.3, 0.4)
SINE_SIGMAS = (0.0, 0.05, 0.1, 0.2)
SINE_TREND_SIGMA = 0.02


def splitmix64(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the SplitMix64 stream for ``seed``."""
    seed &= _MASK64
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + idx * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_MUL_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_MUL_2)
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, count: int) -> np.ndarray:
    """Doubles in [0, 1) built from the top 53 bits of each output."""
    bits = splitmix64(seed, count) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / (1 << 53))


def standard_normals(seed: int, count: int) -> np.ndarray:
    """Box-Muller normals; output pair ``k`` consumes uniforms ``2k`` and ``2k+1``."""
    pairs = (count + 1) // 2
    u = uniforms(seed, 2 * pairs)
    # 1 - u lies in (0, 1], keeping the log finite
    radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count]


class SignalKind(str, enum.Enum):
    ALMOST_PERIODIC = "almost_periodic"
    SINE = "sine"
    SINE_PLUS_TREND = "sine_plus_trend"


def base_signal(kind, t):
    t = np.asarray(t, dtype=float)
    kind = SignalKind(kind)
    if kind is SignalKind.ALMOST_PERIODIC:
        return np.cos(2.0 * np.pi * t) + np.cos(2.0 * t)
    if kind is SignalKind.SINE:
        return np.sin(t)
    return np.sin(t) + 0.2 * t


@dataclass(frozen=True)
class SynthSpec:
    kind: SignalKind = SignalKind.ALMOST_PERIODIC
    sigma: float = 0.0
    n_points: int = 500
    t_start: float = 0.0
    t_end: float = 8 * math.pi
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SignalKind(self.kind))
        except ValueError:
            raise InvalidArgument(f"unknown signal kind {self.kind!r}") from None
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise InvalidArgument("sigma must be a finite nonnegative number")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise InvalidArgument("n_points must be an integer >= 2")
        if not self.t_end > self.t_start:
            raise InvalidArgument("t_end must exceed t_start")
        if not -(1 << 63) <= int(self.seed) < (1 << 64):
            raise InvalidArgument("seed must fit in 64 bits")

    def grid(self) -> np.ndarray:
        i = np.arange(self.n_points, dtype=float)
        return self.t_start + i * (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def label(self) -> str:
        return f"{self.kind.value}_sigma{self.sigma:g}_seed{self.seed}"


def generate(spec: SynthSpec) -> TimeSeries:
    t = spec.grid()
    values = base_signal(spec.kind, t)
    if spec.sigma > 0:
        values = values + spec.sigma * standard_normals(spec.seed, spec.n_points)
    return TimeSeries(t, values, name=spec.label)
