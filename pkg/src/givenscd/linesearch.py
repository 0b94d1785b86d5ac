"""Global minimization of 2*pi-periodic one-variable functions.

A coarse equispaced grid over [-pi, pi) locates the basin, golden-section
search refines inside the bracket around the best grid point. Values within
``64 * eps * scale`` of the minimum are treated as ties and resolved towards
the smallest angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError
from .manifold import wrap_angle

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
TIE_EPS = 64.0 * np.finfo(float).eps


@dataclass(frozen=True)
class LineSearchResult:
    theta: float
    value: float
    g0: float
    evaluations: int


def _checked(theta, value):
    if not math.isfinite(value):
        raise NumericError(f"non-finite objective value {value!r} at theta={theta!r}", theta=theta)
    return value


def _eval_grid(g, thetas):
    if getattr(g, "vectorized", False):
        values = np.asarray(g(thetas), dtype=float)
    else:
        values = np.array([g(float(t)) for t in thetas], dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        t = float(thetas[bad[0]])
        raise NumericError(f"non-finite objective value {values[bad[0]]!r} at theta={t!r}", theta=t)
    return values


def golden_section(g: Callable[[float], float], a: float, b: float, tol: float):
    """Minimize ``g`` on [a, b]. Returns (x, g(x), number of evaluations)."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = _checked(c, float(g(c)))
    fd = _checked(d, float(g(d)))
    n = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = _checked(c, float(g(c)))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = _checked(d, float(g(d)))
        n += 1
    if fc <= fd:
        return c, fc, n
    return d, fd, n


def line_minimize_periodic(g: Callable, tol: float = 1e-10, n_grid: int = 32) -> LineSearchResult:
    """Minimize a 2*pi-periodic function over [-pi, pi).

    ``g`` may set ``g.vectorized = True`` to receive the whole grid as one
    array. The result is never worse than the best grid point and, on ties,
    is the smallest tied grid angle.
    """
    if n_grid < 2 or n_grid % 2:
        raise ValueError("n_grid must be an even integer >= 2 so that theta = 0 is on the grid")
    step = 2.0 * math.pi / n_grid
    thetas = -math.pi + step * np.arange(n_grid)
    values = _eval_grid(g, thetas)
    evaluations = n_grid
    g0 = float(values[n_grid // 2])

    vmin = float(values.min())
    tie = TIE_EPS * float(np.abs(values).max())
    k = int(np.flatnonzero(values <= vmin + tie)[0])
    best_theta, best_value = float(thetas[k]), float(values[k])

    x, fx, n = golden_section(g, best_theta - step, best_theta + step, tol)
    evaluations += n
    if fx < best_value - tie:
        best_theta, best_value = wrap_angle(x), fx
    return LineSearchResult(best_theta, best_value, g0, evaluations)
