"""Flows S(t): x -> x - t k(x), pushforwards of density measures under them,
and the finite-difference weak-derivative oracle.

The oracle computes d/dt <S(t)_* nu, phi> at t=0 by central differences of
pushforward pairings.  It touches no analytic derivative formula, so it is
the independent ground truth for

    d/dt <S(t)_* nu, phi> |_{t=0}  =  <nu, phi * beta_k>,

with beta_k(x) = <grad log-density, k(x)> + tr k'(x) from `measures`.
Pushforward pairings are always evaluated as integrals over the base measure
(integrate phi(x - t k(x)) against nu), so no map inversion enters the
oracle path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import fd
from .errors import DimensionMismatch, FlowDomainError, InversionError
from .measures import (DensityMeasure, PairingEngine, TestFunction, VectorField,
                       pair, product_with, score_field)


@dataclass(frozen=True)
class Flow:
    """One-parameter family of maps x -> x - t k(x)."""
    field: VectorField
    t: float

    def map(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x - self.t * self.field.value(x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.field.dim)
        return eye - self.t * self.field.jacobian(x)

    def injectivity_bound(self, probes: np.ndarray) -> float:
        """t_max = 0.5 / max operator norm of k' over the probe set.

        Below this bound det(I - t k') stays positive on the probes, so the
        flow is injective there.
        """
        jac = np.asarray(self.field.jacobian(np.atleast_2d(probes)))
        norms = np.linalg.norm(jac, ord=2, axis=(1, 2))
        top = float(np.max(norms)) if norms.size else 0.0
        return np.inf if top == 0.0 else 0.5 / top


def _invert_flow(flow: Flow, y: np.ndarray, tol: float = 1e-12,
                 max_iter: int = 50) -> np.ndarray:
    """Damped Newton solve of x - t k(x) = y, started from x = y."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x = y.copy()
    res = flow.map(x) - y
    for _ in range(max_iter):
        norm = np.linalg.norm(res, axis=1)
        active = norm > tol
        if not np.any(active):
            return x
        jac = flow.jacobian(x[active])
        step = np.linalg.solve(jac, res[active])
        scale = np.ones(step.shape[0])
        for _halve in range(30):
            trial = x[active] - scale[:, None] * step
            trial_res = flow.map(trial) - y[active]
            worse = np.linalg.norm(trial_res, axis=1) > norm[active]
            if not np.any(worse):
                break
            scale[worse] *= 0.5
        x[active] = x[active] - scale[:, None] * step
        res = flow.map(x) - y
    if np.any(np.linalg.norm(res, axis=1) > tol):
        worst = int(np.argmax(np.linalg.norm(res, axis=1)))
        raise InversionError(f"flow inversion did not converge at {y[worst]!r}")
    return x


@dataclass(frozen=True)
class PushforwardMeasure:
    """S(t)_* nu realized through its transported log-density."""
    base: DensityMeasure
    flow: Flow

    def pushed_log_density(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        x = _invert_flow(self.flow, y)
        jac = self.flow.jacobian(x)
        det = np.linalg.det(jac)
        if np.any(det <= 0.0):
            raise InversionError("flow Jacobian determinant is not positive")
        return self.base.log_density(x) - np.log(det)


def _flow_probes(measure: DensityMeasure, engine: PairingEngine) -> np.ndarray:
    """Representative points used to estimate the injectivity bound."""
    from .measures import _hermite_grid, box_grid  # local: cache helpers
    import math
    if engine.mode == "tensor_grid_quadrature":
        box = engine.box if engine.box is not None else measure.box
        if box is not None:
            nodes, _ = box_grid(box, min(engine.order_or_samples, 12))
            return nodes
    if measure.gh_frame is not None:
        mean, tril = measure.gh_frame
        nodes, _ = _hermite_grid(measure.dim, min(12, max(4, engine.order_or_samples)))
        return mean + math.sqrt(2.0) * nodes @ tril.T
    return np.zeros((1, measure.dim))


def pushforward_pairing(measure: DensityMeasure, field: VectorField, t: float,
                        test_fn: TestFunction, engine: PairingEngine,
                        check_bound: bool = True):
    """<S(t)_* nu, phi> = integral of phi(x - t k(x)) d nu(x)."""
    if field.dim != measure.dim:
        raise DimensionMismatch("field and measure dimensions differ")
    flow = Flow(field=field, t=t)
    if check_bound and t != 0.0:
        bound = flow.injectivity_bound(_flow_probes(measure, engine))
        if abs(t) >= bound:
            raise FlowDomainError(f"|t|={abs(t)} exceeds injectivity bound {bound}")

    def integrand(x, _f=test_fn.value, _flow=flow):
        return _f(_flow.map(x))

    return pair(measure, integrand, engine)


def weak_derivative_fd(measure: DensityMeasure, field: VectorField,
                       test_fn: TestFunction, engine: PairingEngine,
                       delta: float = 1e-4):
    """Central difference of t -> <S(t)_* nu, phi> at t=0."""
    if delta <= 0.0:
        raise FlowDomainError("fd step must be positive")
    plus = pushforward_pairing(measure, field, +delta, test_fn, engine)
    minus = pushforward_pairing(measure, field, -delta, test_fn, engine)
    return (plus - minus) / (2.0 * delta)


def weak_derivative_richardson(measure: DensityMeasure, field: VectorField,
                               test_fn: TestFunction, engine: PairingEngine,
                               delta: float = 1e-3):
    """Richardson combination of the central differences at delta and delta/2."""
    coarse = weak_derivative_fd(measure, field, test_fn, engine, delta)
    fine = weak_derivative_fd(measure, field, test_fn, engine, delta / 2.0)
    return fd.richardson(coarse, fine)


@dataclass(frozen=True)
class ProbeCheck:
    probe: str
    fd_value: complex
    analytic: complex
    abs_err: float
    rel_err: float


@dataclass(frozen=True)
class RadonNikodymReport:
    rows: tuple[ProbeCheck, ...]
    max_rel_err: float
    tolerance: float
    passed: bool


def radon_nikodym_check(measure: DensityMeasure, field: VectorField,
                        probes: Sequence[TestFunction], engine: PairingEngine,
                        delta: float = 1e-4, tolerance: float = 1e-6,
                        use_richardson: bool = False) -> RadonNikodymReport:
    """Certify that the weak derivative has density beta_k with respect to nu.

    Both sides travel independent code paths: the left via finite differences
    of pushforward pairings, the right via the analytic score and Jacobian
    trace.
    """
    if not probes:
        raise ValueError("probe set must be non-empty")
    beta = score_field(measure, field)
    rows = []
    for phi in probes:
        if use_richardson:
            lhs = weak_derivative_richardson(measure, field, phi, engine, delta)
        else:
            lhs = weak_derivative_fd(measure, field, phi, engine, delta)
        rhs = pair(measure, product_with(phi, beta), engine)
        abs_err = abs(lhs - rhs)
        rel_err = fd.relative_error(lhs, rhs)
        rows.append(ProbeCheck(probe=phi.name or "phi", fd_value=lhs, analytic=rhs,
                               abs_err=abs_err, rel_err=rel_err))
    worst = max(r.rel_err for r in rows)
    return RadonNikodymReport(rows=tuple(rows), max_rel_err=worst,
                              tolerance=tolerance, passed=worst <= tolerance)
