"""Forecasting front-ends sharing one result shape: LLMTIME sampling and ARIMA."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import arima, codec
from .codec import ScalingConfig, ScalingState
from .core import TimeSeries, mae
from .errors import DecodeFailure, ForecastFailure, InvalidArgument
from .llm import DEFAULT_MODEL, MAX_SAMPLES_PER_REQUEST, CompletionRequest

PROMPT_SUFFIX = " ,"


@dataclass(frozen=True)
class LlmtimeConfig:
    scaling: ScalingConfig = ScalingConfig()
    num_samples: int = 10
    temperature: float = 0.7
    # None -> 2 * (mean digits per encoded train value) + 2
    tokens_per_value_estimate: Optional[float] = None
    safety_factor: float = 1.3
    min_valid_samples: int = 1
    model_name: str = DEFAULT_MODEL
    # bypasses fit_scaling when set
    fixed_scaling: Optional[ScalingState] = None

    def __post_init__(self):
        if self.num_samples < 1:
            raise InvalidArgument("num_samples must be positive")
        if not 1 <= self.min_valid_samples <= self.num_samples:
            raise InvalidArgument("min_valid_samples must lie in [1, num_samples]")
        if self.safety_factor < 1:
            raise InvalidArgument("safety_factor must be >= 1")
        if self.tokens_per_value_estimate is not None and not self.tokens_per_value_estimate > 0:
            raise InvalidArgument("tokens_per_value_estimate must be positive")


@dataclass(frozen=True)
class ForecastResult:
    point: np.ndarray
    samples: np.ndarray
    num_invalid: int
    model_label: str
    details: dict = field(default_factory=dict, compare=False)


def _values(train) -> np.ndarray:
    return np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=float)


def scaling_for(train_values, config: LlmtimeConfig) -> ScalingState:
    if config.fixed_scaling is not None:
        return config.fixed_scaling
    return codec.fit_scaling(train_values, config.scaling)


def build_prompt(train_values, state: ScalingState) -> str:
    return codec.encode(train_values, state).text + PROMPT_SUFFIX


def tokens_per_value(encoded: str, config: LlmtimeConfig) -> float:
    if config.tokens_per_value_estimate is not None:
        return config.tokens_per_value_estimate
    chunks = encoded.split(codec.VALUE_SEP)
    digits = sum(ch.isdigit() for ch in encoded) / len(chunks)
    return 2.0 * digits + 2.0


def max_tokens_for(horizon: int, encoded: str, config: LlmtimeConfig) -> int:
    return int(math.ceil(horizon * tokens_per_value(encoded, config) * config.safety_factor))


def _collect_texts(provider, prompt: str, max_tokens: int, config: LlmtimeConfig):
    texts = []
    remaining = config.num_samples
    while remaining > 0:
        n = min(remaining, MAX_SAMPLES_PER_REQUEST)
        request = CompletionRequest(
            prompt=prompt, model_name=config.model_name, max_tokens=max_tokens,
            temperature=config.temperature, num_samples=n,
        )
        batch = provider.complete(request)
        texts.extend(batch.texts)
        remaining -= n
    return texts


def llmtime_forecast(train, horizon: int, config: LlmtimeConfig, provider) -> ForecastResult:
    """Scale, encode, sample continuations, decode and take the pointwise median.

    A sample counts as valid when it decodes to at least ``horizon`` values;
    longer samples are cut to ``horizon``.
    """
    x = _values(train)
    if x.size == 0:
        raise InvalidArgument("train must be nonempty")
    if int(horizon) != horizon or horizon < 1:
        raise InvalidArgument("horizon must be a positive integer")
    horizon = int(horizon)

    state = scaling_for(x, config)
    encoded = codec.encode(x, state).text
    prompt = encoded + PROMPT_SUFFIX
    max_tokens = max_tokens_for(horizon, encoded, config)
    texts = _collect_texts(provider, prompt, max_tokens, config)

    rows = []
    for text in texts:
        try:
            values = codec.decode(text, state, max_values=horizon)
        except DecodeFailure:
            continue
        if values.size >= horizon:
            rows.append(values[:horizon])
    num_invalid = len(texts) - len(rows)
    if len(rows) < config.min_valid_samples:
        raise ForecastFailure(
            f"{len(rows)} valid samples of {len(texts)}, need {config.min_valid_samples}",
            num_invalid=num_invalid,
        )
    samples = np.vstack(rows)
    return ForecastResult(
        point=np.median(samples, axis=0),
        samples=samples,
        num_invalid=num_invalid,
        model_label=f"LLMTIME({config.model_name})",
        details={
            "offset": state.offset, "scale": state.scale,
            "alpha": state.config.alpha, "beta": state.config.beta,
            "precision": state.precision, "max_tokens": max_tokens,
        },
    )


@dataclass(frozen=True)
class ArimaSettings:
    order: Optional[arima.ArimaOrder] = None
    max_p: int = 12
    max_d: int = 2
    max_q: int = 1
    options: arima.FitOptions = arima.FitOptions()


def arima_forecast(train, horizon: int, order: Optional[arima.ArimaOrder] = None,
                   settings: ArimaSettings = ArimaSettings()) -> ForecastResult:
    x = _values(train)
    order = order or settings.order
    if order is None:
        order, model = arima.select_and_fit(x, settings.max_p, settings.max_d, settings.max_q, settings.options)
    else:
        model = arima.fit(x, order, settings.options)
    point = arima.forecast(model, horizon)
    return ForecastResult(point, point[None, :].copy(), 0, str(order), details=model.to_record())


# --- scaling scorers ----------------------------------------------------------

def mae_scorer(provider, config: LlmtimeConfig = LlmtimeConfig()):
    """Proxy score: negative MAE of the median forecast over the validation span."""
    def score(train, validation, scaling: ScalingConfig) -> float:
        cfg = replace(config, scaling=scaling, fixed_scaling=None)
        result = llmtime_forecast(train, len(validation), cfg, provider)
        return -mae(result.point, validation)
    return score


def loglik_scorer(provider):
    """Validation log-likelihood, as a density on the original axis.

    The provider's log-probability of the encoded continuation is a
    probability mass on a grid of width ``scale * 10**-precision`` per value,
    so ``n * log(width)`` is subtracted to make configs comparable.
    """
    def score(train, validation, scaling: ScalingConfig) -> float:
        state = codec.fit_scaling(train, scaling)
        prompt = build_prompt(train, state)
        continuation = " " + codec.encode(validation, state).text
        lp = provider.continuation_logprob(prompt, continuation)
        width = state.scale * 10.0 ** (-state.precision)
        return lp - len(validation) * math.log(width)
    return score


def default_scorer(provider, config: LlmtimeConfig = LlmtimeConfig()):
    if hasattr(provider, "continuation_logprob"):
        return loglik_scorer(provider)
    return mae_scorer(provider, config)
