"""Measures with smooth densities on R^n and their logarithmic derivatives.

A measure is represented by a (possibly unnormalized) smooth log-density
`l(x)`, so that nu(dx) = exp(l(x)) dx.  The flat kind models the
translation-invariant reference measure on a finite-dimensional truncation:
its log-density is constant and its score vanishes identically.

Logarithmic derivatives:

    beta(h, x)   = <grad l(x), h>                  (along a constant vector h)
    beta_k(x)    = <grad l(x), k(x)> + tr k'(x)    (along a vector field k)

The second formula is the analytic object certified against the
finite-difference pushforward oracle in `transport`.

Pairings <nu, phi> = integral of phi * exp(l) are evaluated by one of three
engines: Gauss-Hermite quadrature in an affine Gaussian frame, tensor-product
Gauss-Legendre quadrature over a bounded box, or seeded Monte Carlo with
importance weights.  Deterministic engines are bit-reproducible; Monte Carlo
results depend only on (seed, total samples, worker count).

All function fields are batched: points have shape (N, dim), scalar maps
return (N,), vector maps (N, dim), Jacobians (N, dim, dim).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Literal, Optional, Union

import numpy as np
from scipy.special import roots_hermite, roots_legendre

from . import fd
from .errors import DimensionMismatch, EngineConfigError, NonFiniteValue

MeasureKind = Literal["normalized_probability", "unnormalized", "flat"]
FamilyTag = Literal["polynomial_times_gaussian", "compact_bump", "plane_wave"]
EngineMode = Literal["gauss_hermite_quadrature", "tensor_grid_quadrature", "monte_carlo"]

ScalarMap = Callable[[np.ndarray], np.ndarray]
VectorMap = Callable[[np.ndarray], np.ndarray]

_KINDS = ("normalized_probability", "unnormalized", "flat")
_MODES = ("gauss_hermite_quadrature", "tensor_grid_quadrature", "monte_carlo")


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce a single point (dim,) or a batch (N, dim) to (N, dim)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DimensionMismatch(f"point has dimension {arr.shape[0]}, expected {dim}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatch(f"points have shape {arr.shape}, expected (N, {dim})")
    return arr, False


def _require_finite(values: np.ndarray, points: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if values.dtype.kind == "c":
        bad = ~(np.isfinite(values.real) & np.isfinite(values.imag))
    if np.any(bad):
        idx = int(np.argmax(bad.reshape(bad.shape[0], -1).any(axis=1)))
        raise NonFiniteValue(f"non-finite {what} at probe point {points[idx]!r}")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sampler:
    """Proposal distribution for Monte Carlo pairings.

    `draw(rng, n)` returns n points of shape (n, dim); `log_pdf` is the
    proposal's normalized log-density, used for importance weights
    exp(log_density - log_pdf).
    """
    draw: Callable[[np.random.Generator, int], np.ndarray]
    log_pdf: ScalarMap


@dataclass(frozen=True)
class DensityMeasure:
    dim: int
    log_density: ScalarMap
    log_density_gradient: VectorMap
    kind: MeasureKind = "unnormalized"
    sampler: Optional[Sampler] = None
    # affine frame (mean, scale_tril) used by Gauss-Hermite quadrature
    gh_frame: Optional[tuple[np.ndarray, np.ndarray]] = None
    # default integration box for grid quadrature, shape (dim, 2)
    box: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("dim must be a positive integer")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    def density(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(x))

    def gradient_check(self, points: np.ndarray, step: float = fd.DEFAULT_STEP) -> float:
        """Max relative error of the analytic score against central differences."""
        pts, _ = _as_points(points, self.dim)
        analytic = self.log_density_gradient(pts)
        numeric = fd.central_gradient(self.log_density, pts, step)
        scale = np.maximum(1.0, np.abs(numeric))
        return float(np.max(np.abs(analytic - numeric) / scale))


@dataclass(frozen=True)
class TestFunction:
    dim: int
    value: ScalarMap
    gradient: VectorMap
    family_tag: FamilyTag = "polynomial_times_gaussian"
    name: str = ""

    def gradient_check(self, points: np.ndarray, step: float = fd.DEFAULT_STEP) -> float:
        pts, _ = _as_points(points, self.dim)
        analytic = self.gradient(pts)
        numeric = fd.central_gradient(self.value, pts, step)
        scale = np.maximum(1.0, np.abs(numeric))
        return float(np.max(np.abs(analytic - numeric) / scale))


@dataclass(frozen=True)
class VectorField:
    dim: int
    value: VectorMap
    jacobian: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    @classmethod
    def constant(cls, h) -> "VectorField":
        h = np.atleast_1d(np.asarray(h, dtype=float))
        dim = h.shape[0]

        def value(x, _h=h):
            x = np.asarray(x)
            return np.broadcast_to(_h, x.shape).copy()

        def jacobian(x, _d=dim):
            x = np.asarray(x)
            return np.zeros((x.shape[0], _d, _d))

        return cls(dim=dim, value=value, jacobian=jacobian, name=f"constant{h.tolist()}")

    @classmethod
    def linear(cls, matrix) -> "VectorField":
        a = np.atleast_2d(np.asarray(matrix, dtype=float))
        dim = a.shape[0]
        if a.shape != (dim, dim):
            raise DimensionMismatch("linear field needs a square matrix")

        def value(x, _a=a):
            return np.asarray(x) @ _a.T

        def jacobian(x, _a=a):
            x = np.asarray(x)
            return np.broadcast_to(_a, (x.shape[0],) + _a.shape).copy()

        return cls(dim=dim, value=value, jacobian=jacobian, name="linear")

    @classmethod
    def from_callable(cls, dim: int, value: VectorMap, jacobian=None,
                      step: float = 1e-6, name: str = "") -> "VectorField":
        if jacobian is None:
            def jacobian(x, _f=value, _s=step):
                return fd.central_jacobian(_f, x, _s)
        return cls(dim=dim, value=value, jacobian=jacobian, name=name)

    def jacobian_check(self, points: np.ndarray, step: float = fd.DEFAULT_STEP) -> float:
        pts, _ = _as_points(points, self.dim)
        analytic = self.jacobian(pts)
        numeric = fd.central_jacobian(self.value, pts, step)
        scale = np.maximum(1.0, np.abs(numeric))
        return float(np.max(np.abs(analytic - numeric) / scale))


@dataclass(frozen=True)
class PairingEngine:
    mode: EngineMode
    order_or_samples: int
    seed: int = 0
    reported_tolerance: float = 1e-9
    box: Optional[np.ndarray] = None
    workers: int = 1

    def __post_init__(self):
        if self.mode not in _MODES:
            raise EngineConfigError(f"unknown engine mode {self.mode!r}")
        if self.order_or_samples < 1:
            raise EngineConfigError("order_or_samples must be positive")
        if self.reported_tolerance <= 0:
            raise EngineConfigError("reported_tolerance must be positive")
        if self.workers < 1:
            raise EngineConfigError("workers must be >= 1")


@dataclass(frozen=True)
class PairingEstimate:
    value: complex
    stderr: Optional[float] = None
    n_samples: Optional[int] = None


def gauss_hermite(order: int) -> PairingEngine:
    return PairingEngine(mode="gauss_hermite_quadrature", order_or_samples=order)


def tensor_grid(order: int, box=None) -> PairingEngine:
    b = None if box is None else np.asarray(box, dtype=float)
    return PairingEngine(mode="tensor_grid_quadrature", order_or_samples=order, box=b)


def monte_carlo(samples: int, seed: int, workers: int = 1) -> PairingEngine:
    return PairingEngine(mode="monte_carlo", order_or_samples=samples, seed=seed,
                         workers=workers, reported_tolerance=1e-2)


# ---------------------------------------------------------------------------
# quadrature node caches
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _hermite_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = roots_hermite(order)
    return u, w


@lru_cache(maxsize=64)
def _legendre_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = roots_legendre(order)
    return u, w


@lru_cache(maxsize=32)
def _hermite_grid(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite grid: nodes (P, dim), log-weights (P,)."""
    u, w = _hermite_nodes(order)
    grids = np.meshgrid(*([u] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    logw = np.zeros(nodes.shape[0])
    lw = np.log(w)
    idx = np.meshgrid(*([np.arange(order)] * dim), indexing="ij")
    for k in range(dim):
        logw += lw[idx[k].ravel()]
    return nodes, logw


def box_grid(box: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre grid over a box, nodes (P, dim) and weights (P,)."""
    box = np.atleast_2d(np.asarray(box, dtype=float))
    dim = box.shape[0]
    u, w = _legendre_nodes(order)
    axes, weights = [], []
    for k in range(dim):
        lo, hi = box[k]
        if not hi > lo:
            raise EngineConfigError(f"degenerate box on axis {k}: [{lo}, {hi}]")
        axes.append(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*weights, indexing="ij")
    wtot = np.ones(nodes.shape[0])
    for g in wgrids:
        wtot = wtot * g.ravel()
    return nodes, wtot


# ---------------------------------------------------------------------------
# pairing engines
# ---------------------------------------------------------------------------

def _integrand_of(test_fn: Union[TestFunction, ScalarMap]) -> ScalarMap:
    return test_fn.value if isinstance(test_fn, TestFunction) else test_fn


def _integrate_gauss_hermite(measure: DensityMeasure, f: ScalarMap,
                             order: int) -> complex:
    if measure.gh_frame is not None:
        mean, tril = measure.gh_frame
    else:
        mean, tril = np.zeros(measure.dim), np.eye(measure.dim)
    nodes, logw = _hermite_grid(measure.dim, order)
    x = mean + math.sqrt(2.0) * nodes @ tril.T
    # d x = 2^(d/2) |det L| d u against weight exp(-|u|^2)
    log_jac = 0.5 * measure.dim * math.log(2.0) + float(
        np.sum(np.log(np.abs(np.diag(tril)))))
    log_mass = measure.log_density(x) + np.sum(nodes ** 2, axis=1) + log_jac
    vals = np.asarray(f(x))
    _require_finite(vals, x, "integrand value")
    total = np.sum(np.exp(logw + log_mass) * vals)
    return complex(total) if vals.dtype.kind == "c" else float(total)


def _integrate_box(measure: DensityMeasure, f: ScalarMap, order: int,
                   box: np.ndarray) -> complex:
    nodes, weights = box_grid(box, order)
    vals = np.asarray(f(nodes))
    _require_finite(vals, nodes, "integrand value")
    total = np.sum(weights * np.exp(measure.log_density(nodes)) * vals)
    return complex(total) if vals.dtype.kind == "c" else float(total)


def _worker_chunks(total: int, workers: int) -> list[int]:
    base, extra = divmod(total, workers)
    return [base + (1 if k < extra else 0) for k in range(workers)]


def _integrate_monte_carlo(measure: DensityMeasure, f: ScalarMap,
                           engine: PairingEngine) -> PairingEstimate:
    sampler = measure.sampler
    if sampler is None:
        raise EngineConfigError("monte_carlo pairing requires a sampler on the measure")
    n = engine.order_or_samples
    seeds = np.random.SeedSequence(engine.seed).spawn(engine.workers)
    sum_v = 0.0 + 0.0j
    sum_abs2 = 0.0
    complex_seen = False
    for chunk, ss in zip(_worker_chunks(n, engine.workers), seeds):
        if chunk == 0:
            continue
        rng = np.random.Generator(np.random.PCG64(ss))
        x = sampler.draw(rng, chunk)
        logw = measure.log_density(x) - sampler.log_pdf(x)
        vals = np.asarray(f(x)) * np.exp(logw)
        _require_finite(vals, x, "integrand value")
        complex_seen = complex_seen or vals.dtype.kind == "c"
        sum_v += complex(np.sum(vals))
        sum_abs2 += float(np.sum(np.abs(vals) ** 2))
    mean = sum_v / n
    var = max(0.0, (sum_abs2 - n * abs(mean) ** 2) / max(1, n - 1))
    stderr = math.sqrt(var / n)
    value = mean if complex_seen else mean.real
    return PairingEstimate(value=value, stderr=stderr, n_samples=n)


def pair_estimate(measure: DensityMeasure, test_fn, engine: PairingEngine) -> PairingEstimate:
    """Pairing <nu, phi> with a standard-error estimate in Monte Carlo mode."""
    if isinstance(test_fn, TestFunction) and test_fn.dim != measure.dim:
        raise DimensionMismatch(
            f"test function dimension {test_fn.dim} != measure dimension {measure.dim}")
    f = _integrand_of(test_fn)
    if measure.kind == "flat" and engine.mode != "tensor_grid_quadrature":
        raise EngineConfigError(
            "flat measures pair only under grid quadrature over a bounded box")
    if engine.mode == "gauss_hermite_quadrature":
        return PairingEstimate(_integrate_gauss_hermite(measure, f, engine.order_or_samples))
    if engine.mode == "tensor_grid_quadrature":
        box = engine.box if engine.box is not None else measure.box
        if box is None:
            raise EngineConfigError("tensor grid quadrature needs a bounded box "
                                    "(on the engine or the measure)")
        return PairingEstimate(_integrate_box(measure, f, engine.order_or_samples, box))
    return _integrate_monte_carlo(measure, f, engine)


def pair(measure: DensityMeasure, test_fn, engine: PairingEngine):
    """Pairing <nu, phi> = integral of phi(x) exp(log_density(x)) dx."""
    return pair_estimate(measure, test_fn, engine).value


# ---------------------------------------------------------------------------
# logarithmic derivatives
# ---------------------------------------------------------------------------

def log_derivative_along_vector(measure: DensityMeasure, h, x):
    """beta(h, x) = <grad log_density(x), h>; identically 0 for flat measures."""
    pts, single = _as_points(x, measure.dim)
    h_arr = np.asarray(h, dtype=float)
    if h_arr.ndim == 1:
        if h_arr.shape[0] != measure.dim:
            raise DimensionMismatch(f"direction has dimension {h_arr.shape[0]}, "
                                    f"expected {measure.dim}")
        h_arr = np.broadcast_to(h_arr, pts.shape)
    elif h_arr.shape != pts.shape:
        raise DimensionMismatch("batched direction must match the point batch shape")
    if measure.kind == "flat":
        out = np.zeros(pts.shape[0])
    else:
        ell = np.asarray(measure.log_density(pts))
        _require_finite(ell, pts, "log-density")
        score = np.asarray(measure.log_density_gradient(pts))
        out = np.einsum("nd,nd->n", score, h_arr)
    return float(out[0]) if single else out


def log_derivative_along_field(measure: DensityMeasure, field: VectorField, x):
    """beta_k(x) = beta(k(x), x) + tr k'(x).

    Reduces bit-exactly to `log_derivative_along_vector` for constant fields,
    whose Jacobian term is exactly zero.
    """
    if field.dim != measure.dim:
        raise DimensionMismatch(f"field dimension {field.dim} != measure dimension "
                                f"{measure.dim}")
    pts, single = _as_points(x, measure.dim)
    jac = np.asarray(field.jacobian(pts))
    _require_finite(jac, pts, "field Jacobian")
    trace = np.trace(jac, axis1=-2, axis2=-1)
    base = log_derivative_along_vector(measure, field.value(pts), pts)
    out = np.asarray(base) + trace
    return float(out[0]) if single else out


def score_field(measure: DensityMeasure, field: VectorField) -> ScalarMap:
    """The map x -> beta_k(x) as a batched callable (for pairing integrands)."""
    def beta(x):
        return log_derivative_along_field(measure, field, np.atleast_2d(x))
    return beta


# ---------------------------------------------------------------------------
# measure constructors
# ---------------------------------------------------------------------------

def _coerce_cov(dim: int, cov) -> np.ndarray:
    c = np.asarray(cov, dtype=float)
    if c.ndim == 0:
        return float(c) * np.eye(dim)
    if c.ndim == 1:
        if c.shape[0] != dim:
            raise DimensionMismatch("diagonal covariance length mismatch")
        return np.diag(c)
    if c.shape != (dim, dim):
        raise DimensionMismatch("covariance must be (dim, dim)")
    return c


def gaussian(mean, cov=1.0) -> DensityMeasure:
    """Normalized Gaussian measure N(mean, cov) with exact sampler and GH frame."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    dim = mean.shape[0]
    sigma = _coerce_cov(dim, cov)
    tril = np.linalg.cholesky(sigma)
    prec = np.linalg.inv(sigma)
    log_norm = -0.5 * dim * math.log(2.0 * math.pi) - float(
        np.sum(np.log(np.diag(tril))))

    def log_density(x, _m=mean, _p=prec, _c=log_norm):
        d = np.asarray(x) - _m
        return _c - 0.5 * np.einsum("nd,de,ne->n", d, _p, d)

    def gradient(x, _m=mean, _p=prec):
        return -(np.asarray(x) - _m) @ _p.T

    def draw(rng, n, _m=mean, _t=tril):
        z = rng.standard_normal((n, _m.shape[0]))
        return _m + z @ _t.T

    return DensityMeasure(
        dim=dim, log_density=log_density, log_density_gradient=gradient,
        kind="normalized_probability",
        sampler=Sampler(draw=draw, log_pdf=log_density),
        gh_frame=(mean, tril),
        name=f"gaussian(dim={dim})",
    )


def flat_measure(dim: int, log_const: float = 0.0, box=None) -> DensityMeasure:
    """Translation-invariant reference measure on a finite-dimensional truncation."""
    def log_density(x, _c=log_const):
        return np.full(np.asarray(x).shape[0], _c)

    def gradient(x, _d=dim):
        return np.zeros((np.asarray(x).shape[0], _d))

    b = None if box is None else np.atleast_2d(np.asarray(box, dtype=float))
    return DensityMeasure(dim=dim, log_density=log_density,
                          log_density_gradient=gradient, kind="flat",
                          box=b, name=f"flat(dim={dim})")


def scaled(measure: DensityMeasure, log_factor: float) -> DensityMeasure:
    """Same measure with density multiplied by exp(log_factor).

    Shares the gradient closure with the original, so every logarithmic
    derivative is bit-identical; the kind drops to 'unnormalized'.
    """
    base_log = measure.log_density

    def log_density(x, _b=base_log, _c=log_factor):
        return _b(x) + _c

    return replace(measure, log_density=log_density, kind="unnormalized",
                   name=measure.name + f"*exp({log_factor})")


def measure_from_log_density(dim: int, log_density: ScalarMap, gradient=None,
                             kind: MeasureKind = "unnormalized", sampler=None,
                             gh_frame=None, box=None, step: float = 1e-6,
                             name: str = "") -> DensityMeasure:
    if gradient is None:
        def gradient(x, _f=log_density, _s=step):
            return fd.central_gradient(_f, x, _s)
    return DensityMeasure(dim=dim, log_density=log_density,
                          log_density_gradient=gradient, kind=kind,
                          sampler=sampler, gh_frame=gh_frame, box=box, name=name)


# ---------------------------------------------------------------------------
# test-function constructors
# ---------------------------------------------------------------------------

def _monomials(x: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    return np.prod(x[:, None, :] ** exponents[None, :, :], axis=2)


def polynomial(dim: int, terms, decay: float = 0.0, name: str = "") -> TestFunction:
    """p(x) * exp(-decay * |x|^2 / 2) with p given as [(coeff, exponents), ...].

    decay=0 gives a bare polynomial; pair it only against measures with
    enough tail decay of their own.
    """
    coeffs = np.array([c for c, _ in terms], dtype=complex)
    if np.all(coeffs.imag == 0.0):
        coeffs = coeffs.real
    expo = np.array([list(e) for _, e in terms], dtype=float)
    if expo.shape[1] != dim:
        raise DimensionMismatch("exponent tuples must have length dim")

    def value(x, _c=coeffs, _e=expo, _a=decay):
        x = np.asarray(x, dtype=float)
        p = _monomials(x, _e) @ _c
        if _a:
            p = p * np.exp(-0.5 * _a * np.sum(x ** 2, axis=1))
        return p

    def gradient(x, _c=coeffs, _e=expo, _a=decay):
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        out = np.zeros((n, dim), dtype=_c.dtype)
        for j in range(dim):
            ej = _e[:, j]
            shifted = _e.copy()
            shifted[:, j] = np.maximum(ej - 1.0, 0.0)
            out[:, j] = _monomials(x, shifted) @ (_c * ej)
        if _a:
            env = np.exp(-0.5 * _a * np.sum(x ** 2, axis=1))
            p = _monomials(x, _e) @ _c
            out = env[:, None] * (out - _a * x * p[:, None])
        return out

    return TestFunction(dim=dim, value=value, gradient=gradient,
                        family_tag="polynomial_times_gaussian",
                        name=name or f"poly(dim={dim})")


def unit(dim: int) -> TestFunction:
    return polynomial(dim, [(1.0, (0,) * dim)], name="1")


def coordinate(dim: int, axis: int) -> TestFunction:
    e = [0] * dim
    e[axis] = 1
    return polynomial(dim, [(1.0, tuple(e))], name=f"x{axis + 1}")


def bump(dim: int, radius: float = 1.0, center=None, name: str = "") -> TestFunction:
    """Smooth compactly supported bump exp(1 - 1/(1 - |y|^2/R^2)) on |y| < R."""
    c = np.zeros(dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape[0] != dim:
        raise DimensionMismatch("bump center has wrong dimension")

    def value(x, _c=c, _r=radius):
        y = (np.asarray(x, dtype=float) - _c) / _r
        s = np.sum(y ** 2, axis=1)
        out = np.zeros(s.shape[0])
        inside = s < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out

    def gradient(x, _c=c, _r=radius):
        x = np.asarray(x, dtype=float)
        y = (x - _c) / _r
        s = np.sum(y ** 2, axis=1)
        out = np.zeros_like(x)
        inside = s < 1.0
        si = s[inside]
        vi = np.exp(1.0 - 1.0 / (1.0 - si))
        out[inside] = (-vi / (1.0 - si) ** 2)[:, None] * (2.0 * y[inside] / _r)
        return out

    return TestFunction(dim=dim, value=value, gradient=gradient,
                        family_tag="compact_bump",
                        name=name or f"bump(R={radius})")


def plane_wave(dim: int, wave_vector, name: str = "") -> TestFunction:
    k = np.atleast_1d(np.asarray(wave_vector, dtype=float))
    if k.shape[0] != dim:
        raise DimensionMismatch("wave vector has wrong dimension")

    def value(x, _k=k):
        return np.exp(1j * (np.asarray(x, dtype=float) @ _k))

    def gradient(x, _k=k):
        return 1j * _k * value(x)[:, None]

    return TestFunction(dim=dim, value=value, gradient=gradient,
                        family_tag="plane_wave", name=name or f"e^(i<k,x>)")


def product_with(test_fn: TestFunction, factor: ScalarMap, name: str = "") -> ScalarMap:
    """Raw integrand phi(x) * factor(x), for pairings like <nu, phi * beta>."""
    def f(x, _v=test_fn.value, _g=factor):
        return _v(x) * np.asarray(_g(x))
    return f
