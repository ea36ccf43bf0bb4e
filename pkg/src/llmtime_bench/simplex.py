"""Nelder-Mead downhill simplex minimiser."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def adaptive_coefficients(dim: int):
    """Dimension-dependent (reflect, expand, contract, shrink) of Gao and Han (2012).

    In one or two dimensions they coincide with the classic (1, 2, 0.5, 0.5).
    """
    dim = max(dim, 2)
    return 1.0, 1.0 + 2.0 / dim, 0.75 - 1.0 / (2.0 * dim), 1.0 - 1.0 / dim


def minimize(func, x0, step=0.1, ftol=1e-8, xtol=1e-12, max_iter=2000,
             coefficients=None) -> SimplexResult:
    """Minimise ``func`` starting from ``x0``.

    ``step`` is the edge length of the initial simplex (scalar or one entry
    per coordinate). Iteration stops once the spread of objective values over
    the simplex drops below ``ftol``, the simplex collapses below ``xtol``, or
    after ``max_iter`` iterations. ``func`` may return ``inf`` to mark a point
    infeasible; such points are never accepted as the best vertex unless the
    start itself is infeasible.

    ``coefficients`` overrides the (reflect, expand, contract, shrink) tuple;
    by default it adapts to the dimension, which matters above ~5 parameters.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    reflect, expand, contract, shrink = coefficients or adaptive_coefficients(dim)
    steps = np.broadcast_to(np.asarray(step, dtype=float), (dim,))

    pts = np.empty((dim + 1, dim))
    pts[0] = x0
    for i in range(dim):
        pts[i + 1] = x0
        pts[i + 1, i] += steps[i]
    vals = np.array([func(p) for p in pts], dtype=float)
    nfev = dim + 1

    it = 0
    converged = False
    while it < max_iter:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if np.isfinite(vals[-1]) and vals[-1] - vals[0] < ftol:
            converged = True
            break
        if np.max(np.abs(pts[1:] - pts[0])) < xtol:
            converged = True
            break
        it += 1

        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = centroid + reflect * (centroid - worst)
        fr = func(xr)
        nfev += 1
        if vals[0] <= fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[0]:
            xe = centroid + expand * (xr - centroid)
            fe = func(xe)
            nfev += 1
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue

        if fr < vals[-1]:
            # outside contraction
            xc = centroid + contract * (xr - centroid)
            fc = func(xc)
            nfev += 1
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid + contract * (worst - centroid)
            fc = func(xc)
            nfev += 1
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue

        pts[1:] = pts[0] + shrink * (pts[1:] - pts[0])
        for i in range(1, dim + 1):
            vals[i] = func(pts[i])
        nfev += dim

    best = int(np.argmin(vals))
    return SimplexResult(pts[best].copy(), float(vals[best]), it, nfev, converged)
