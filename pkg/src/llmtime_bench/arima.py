"""ARIMA(p, d, q) estimation by conditional sum of squares.

The model on the ``d``-times differenced series ``y`` is

    y_t = c + phi_1 y_{t-1} + ... + phi_p y_{t-p}
            + theta_1 e_{t-1} + ... + theta_q e_{t-q} + e_t

Innovations before ``max(p, q)`` are fixed at zero. Starting values come from
a two-stage Hannan-Rissanen regression and are refined with Nelder-Mead.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from . import simplex
from .core import TimeSeries, difference, integration_seeds, undifference
from .errors import ConvergenceFailure, InvalidArgument

logger = logging.getLogger(__name__)

MAX_ORDER = 12
MIN_EXTRA_OBS = 10


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int
    max_order: int = field(default=MAX_ORDER, compare=False, repr=False)

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise InvalidArgument(f"{name} must be a nonnegative integer, got {v}")
            if v > self.max_order:
                raise InvalidArgument(f"{name}={v} exceeds maximum {self.max_order}")

    @property
    def intercept_only(self) -> bool:
        return self.p == 0 and self.q == 0

    def as_tuple(self):
        return (self.p, self.d, self.q)

    def __str__(self):
        return f"ARIMA({self.p},{self.d},{self.q})"


@dataclass(frozen=True)
class FitOptions:
    enforce_stationarity: bool = True
    max_iter: int = 2000
    ftol: float = 1e-8
    coef_step: float = 0.1


@dataclass(frozen=True)
class FittedArima:
    order: ArimaOrder
    c: float
    phi: np.ndarray
    theta: np.ndarray
    sigma2: float
    residuals: np.ndarray
    train_tail: np.ndarray  # last p + d raw observations
    aic: float
    converged: bool = True

    def __post_init__(self):
        for name in ("phi", "theta", "residuals", "train_tail"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.phi.size != self.order.p or self.theta.size != self.order.q:
            raise InvalidArgument("coefficient counts do not match the order")

    @property
    def process_mean(self) -> float:
        """Mean of the differenced process implied by ``c`` and ``phi``."""
        return self.c / (1.0 - float(np.sum(self.phi)))

    def to_record(self) -> dict:
        return {
            "order": list(self.order.as_tuple()),
            "c": float(self.c),
            "phi": [float(v) for v in self.phi],
            "theta": [float(v) for v in self.theta],
            "sigma2": float(self.sigma2),
            "aic": float(self.aic),
        }


def css_residuals(values, c, phi, theta) -> np.ndarray:
    """In-sample innovations for ``t >= max(p, q)`` with zero pre-sample innovations."""
    y = np.asarray(values, dtype=float)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    p, q = phi.size, theta.size
    m = max(p, q)
    n = y.size
    if n <= m:
        raise InvalidArgument(f"need more than {m} values, got {n}")
    u = y[m:] - c
    for i in range(1, p + 1):
        u = u - phi[i - 1] * y[m - i:n - i]
    if q == 0:
        return u
    # e_t + theta_1 e_{t-1} + ... = u_t, zero initial state
    return lfilter([1.0], np.concatenate([[1.0], theta]), u)


def is_stationary(phi) -> bool:
    """Roots of 1 - phi_1 z - ... - phi_p z^p strictly outside the unit circle."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size == 0 or not np.any(phi):
        return True
    return bool(np.all(np.abs(np.roots(np.concatenate([[1.0], -phi]))) < 1.0))


def is_invertible(theta) -> bool:
    """Roots of 1 + theta_1 z + ... + theta_q z^q strictly outside the unit circle."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size == 0 or not np.any(theta):
        return True
    return bool(np.all(np.abs(np.roots(np.concatenate([[1.0], theta]))) < 1.0))


def aic_value(sse: float, n: int, p: int, q: int) -> float:
    """``n ln(SSE/n) + 2 (p + q + 1)``; a zero SSE is floored at the smallest normal double."""
    ratio = max(sse / n, np.finfo(float).tiny)
    return n * math.log(ratio) + 2 * (p + q + 1)


def _lagged(y, lags, start):
    n = y.size
    return np.column_stack([y[start - i:n - i] for i in range(1, lags + 1)]) if lags else np.empty((n - start, 0))


def hannan_rissanen(y, p: int, q: int):
    """Two-stage least-squares starting values ``(c, phi, theta)``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if q == 0:
        start = p
        X = np.column_stack([np.ones(n - start), _lagged(y, p, start)])
        beta = np.linalg.lstsq(X, y[start:], rcond=None)[0]
        return float(beta[0]), beta[1:], np.zeros(0)

    k = max(min(20, n // 10), 1)
    X = np.column_stack([np.ones(n - k), _lagged(y, k, k)])
    beta = np.linalg.lstsq(X, y[k:], rcond=None)[0]
    resid = np.zeros(n)
    resid[k:] = y[k:] - X @ beta

    start = k + max(p, q)
    if n - start < p + q + 2:
        return float(np.mean(y)), np.zeros(p), np.zeros(q)
    X = np.column_stack([np.ones(n - start), _lagged(y, p, start), _lagged(resid, q, start)])
    beta = np.linalg.lstsq(X, y[start:], rcond=None)[0]
    return float(beta[0]), beta[1:1 + p], beta[1 + p:]


def _feasible(phi, theta, enforce):
    return not enforce or (is_stationary(phi) and is_invertible(theta))


def _pull_inside(y, c, phi, theta, enforce):
    """Shrink an infeasible starting point toward zero until it is admissible."""
    if _feasible(phi, theta, enforce):
        return c, phi, theta
    mean = float(np.mean(y))
    for _ in range(60):
        phi, theta = 0.9 * phi, 0.9 * theta
        if _feasible(phi, theta, enforce):
            return mean * (1.0 - float(np.sum(phi))), phi, theta
    return mean, np.zeros_like(phi), np.zeros_like(theta)


def css_sse(y, c, phi, theta) -> float:
    e = css_residuals(y, c, phi, theta)
    return float(e @ e)


def fit(train, order: ArimaOrder, options: Optional[FitOptions] = None) -> FittedArima:
    """Fit ``order`` to ``train`` (a TimeSeries or array of values)."""
    options = options or FitOptions()
    x = np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=float)
    p, d, q = order.as_tuple()
    need = p + q + d + MIN_EXTRA_OBS
    if x.size < need:
        raise InvalidArgument(f"{order} needs at least {need} observations, got {x.size}")
    y = difference(x, d)
    m = max(p, q)
    n_cond = y.size - m
    tail = x[x.size - (p + d):] if p + d else x[:0]

    def build(c, phi, theta, converged=True):
        e = css_residuals(y, c, phi, theta)
        sse = float(e @ e)
        return FittedArima(order, float(c), phi, theta, sse / n_cond, e, tail,
                           aic_value(sse, n_cond, p, q), converged)

    if p == 0 and q == 0:
        return build(float(np.mean(y)), np.zeros(0), np.zeros(0))

    c0, phi0, theta0 = hannan_rissanen(y, p, q)
    c0, phi0, theta0 = _pull_inside(y, c0, phi0, theta0, options.enforce_stationarity)

    # objective is scaled by var(y) so the tolerance does not depend on units
    norm = float(np.var(y)) * n_cond
    if not norm > 0:
        norm = 1.0

    def objective(params):
        phi, theta = params[1:1 + p], params[1 + p:]
        if options.enforce_stationarity and not (is_stationary(phi) and is_invertible(theta)):
            return math.inf
        value = css_sse(y, params[0], phi, theta) / norm
        return value if math.isfinite(value) else math.inf

    x0 = np.concatenate([[c0], phi0, theta0])
    f0 = objective(x0)
    steps = np.full(x0.size, options.coef_step)
    steps[0] = options.coef_step * max(float(np.std(y)), 1e-8)
    res = simplex.minimize(objective, x0, step=steps, ftol=options.ftol, max_iter=options.max_iter)
    if res.fun > f0:
        best, best_f = x0, f0
    else:
        best, best_f = res.x, res.fun
    if not res.converged:
        if not best_f < f0:
            raise ConvergenceFailure(
                f"{order}: no improvement on the starting point after {res.iterations} iterations",
                best_params=best, best_value=best_f * norm,
            )
        logger.debug("%s: simplex hit the iteration cap", order)
    return build(best[0], best[1:1 + p], best[1 + p:], converged=res.converged)


def forecast(model: FittedArima, horizon: int) -> np.ndarray:
    """Iterate the fitted recursion ``horizon`` steps, future innovations zero."""
    if int(horizon) != horizon or horizon < 1:
        raise InvalidArgument("horizon must be a positive integer")
    p, d, q = model.order.as_tuple()
    tail = model.train_tail
    y_hist = list(np.diff(tail, n=d)[-p:]) if p else []
    e_hist = list(model.residuals[-q:]) if q else []
    e_hist = [0.0] * (q - len(e_hist)) + e_hist
    out = np.empty(int(horizon))
    for h in range(int(horizon)):
        yhat = model.c
        for i in range(1, p + 1):
            yhat += model.phi[i - 1] * y_hist[-i]
        for j in range(1, q + 1):
            yhat += model.theta[j - 1] * e_hist[-j]
        out[h] = yhat
        if p:
            y_hist.append(yhat)
        if q:
            e_hist.append(0.0)
    if d == 0:
        return out
    return undifference(out, integration_seeds(tail, d), d)


def select_d(values, max_d: int, threshold: float = 0.9) -> int:
    """Difference while each pass cuts the sample variance by at least 10%."""
    y = np.asarray(values, dtype=float)
    d = 0
    while d < max_d and y.size > 2:
        var = float(np.var(y))
        nxt = np.diff(y)
        if not var > 0 or float(np.var(nxt)) > threshold * var:
            break
        y, d = nxt, d + 1
    return d


def select_and_fit(train, max_p=5, max_d=2, max_q=2, options: Optional[FitOptions] = None):
    """Grid search returning ``(order, fitted_model)`` with the lowest AIC."""
    if min(max_p, max_d, max_q) < 0:
        raise InvalidArgument("order maxima must be nonnegative")
    x = np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=float)
    d = select_d(x, max_d)
    best = None
    failures = []
    for p, q in itertools.product(range(max_p + 1), range(max_q + 1)):
        order = ArimaOrder(p, d, q, max_order=max(MAX_ORDER, max_p, max_d, max_q))
        try:
            model = fit(x, order, options)
        except (ConvergenceFailure, InvalidArgument) as exc:
            failures.append((order, exc))
            continue
        key = (model.aic, p + q, p)
        if best is None or key < best[0]:
            best = (key, order, model)
    if best is None:
        raise ConvergenceFailure(f"no candidate order could be fitted ({len(failures)} tried)")
    return best[1], best[2]


def select_order(train, max_p=5, max_d=2, max_q=2, options: Optional[FitOptions] = None) -> ArimaOrder:
    return select_and_fit(train, max_p, max_d, max_q, options)[0]
