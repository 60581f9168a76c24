"""Central finite differences: the independent oracle used to certify every
analytic derivative in this package.

All callables follow the batched convention: points are arrays of shape
(N, dim); scalar maps return (N,), vector maps (N, m), Jacobian-valued maps
(N, m, dim).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-5


def central_gradient(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     step: float = DEFAULT_STEP) -> np.ndarray:
    """Gradient of a batched scalar map, one central difference per coordinate."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, dim = x.shape
    probe = f(x)
    out = np.zeros((n, dim), dtype=np.asarray(probe).dtype)
    for j in range(dim):
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += step
        xm[:, j] -= step
        out[:, j] = (f(xp) - f(xm)) / (2.0 * step)
    return out


def central_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                     step: float = DEFAULT_STEP) -> np.ndarray:
    """Jacobian of a batched vector map; result has shape (N, m, dim)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, dim = x.shape
    f0 = np.asarray(f(x))
    cols = []
    for j in range(dim):
        xp = x.copy()
        xm = x.copy()
        xp[:, j] += step
        xm[:, j] -= step
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * step))
    # each col: (N, m) -> stack along last axis
    return np.stack(cols, axis=-1).reshape(n, -1, dim) if f0.ndim > 1 else np.stack(cols, axis=-1)


def central_difference(f: Callable[[float], complex], delta: float) -> complex:
    """(f(+delta) - f(-delta)) / (2 delta) for a scalar-valued map of one parameter."""
    return (f(delta) - f(-delta)) / (2.0 * delta)


def richardson(d_coarse: complex, d_fine: complex) -> complex:
    """Second-order Richardson combination of central differences at steps h and h/2."""
    return (4.0 * d_fine - d_coarse) / 3.0


def observed_order(err_coarse: float, err_fine: float) -> float:
    """Convergence order implied by errors at steps h and h/2."""
    if err_coarse <= 0.0 or err_fine <= 0.0:
        return math.inf
    return math.log2(err_coarse / err_fine)


def relative_error(value: complex, reference: complex, floor: float = 1.0) -> float:
    """|value - reference| / max(floor, |reference|)."""
    return abs(value - reference) / max(floor, abs(reference))


def max_abs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0
