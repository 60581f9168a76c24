"""Weighted measures L(x, g(x), g'(x)) nu under parametric transformations of
E x G, and the five-term formula for their parameter derivative.

A transformation family F(z, x, r, alpha) with F(0, x, r, alpha) = (x, r)
deforms a field configuration g (through its graph) and the measure nu
(through the pushforward of the E-projection).  The parameter derivative of
the resulting weighted-measure family at z = 0 is evaluated pointwise by the
five-term formula

    L1'.h1 + L2'.h2 + L3'.h2' + L tr(.) + L beta(., x)

in two index variants that differ in which variation field feeds the last
two (transport) terms:

  * ``paper_literal``       : trace of h3 = h2' and score along h2
                              (requires dim G = dim E);
  * ``transport_corrected`` : trace of h1' and score along h1, matching the
                              direction that actually pushes the measure.

Neither variant is hard-coded as correct.  `family_weak_derivative_fd` is
the independent z-difference oracle; verification suites adjudicate the
variants against it per scenario and persist the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from . import fd
from .errors import DimensionMismatch, InversionError
from .measures import (DensityMeasure, PairingEngine, TestFunction, VectorField,
                       _as_points, log_derivative_along_vector, pair)

Variant = Literal["paper_literal", "transport_corrected"]
VARIANTS = ("paper_literal", "transport_corrected")


@dataclass(frozen=True)
class LagrangianDensity:
    """Scalar weight L(x, r, alpha) with x in R^n, r in R^m, alpha an (m, n)
    matrix, plus its three partial derivatives.

    Batched shapes: value (N,), d_x (N, n), d_r (N, m), d_alpha (N, m, n).
    Values may be complex.
    """
    n: int
    m: int
    value: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    d_x: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    d_r: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    d_alpha: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = ""

    def partials_check(self, x: np.ndarray, r: np.ndarray, alpha: np.ndarray,
                       step: float = fd.DEFAULT_STEP) -> float:
        """Max relative FD error over the three partial derivatives."""
        x = np.atleast_2d(x)
        r = np.atleast_2d(r)
        alpha = np.asarray(alpha)
        worst = 0.0
        gx = fd.central_gradient(lambda xx: self.value(xx, r, alpha), x, step)
        worst = max(worst, fd.max_abs((self.d_x(x, r, alpha) - gx) / np.maximum(1.0, np.abs(gx))))
        gr = fd.central_gradient(lambda rr: self.value(x, rr, alpha), r, step)
        worst = max(worst, fd.max_abs((self.d_r(x, r, alpha) - gr) / np.maximum(1.0, np.abs(gr))))
        ga = np.zeros_like(alpha, dtype=np.asarray(gx).dtype)
        for i in range(self.m):
            for j in range(self.n):
                ap = alpha.copy()
                am = alpha.copy()
                ap[:, i, j] += step
                am[:, i, j] -= step
                ga[:, i, j] = (self.value(x, r, ap) - self.value(x, r, am)) / (2 * step)
        worst = max(worst, fd.max_abs((self.d_alpha(x, r, alpha) - ga)
                                      / np.maximum(1.0, np.abs(ga))))
        return float(worst)


@dataclass(frozen=True)
class FieldConfiguration:
    """A map g: R^n -> R^m together with its derivative g'(x) of shape (m, n)."""
    n: int
    m: int
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def derivative_check(self, points: np.ndarray, step: float = fd.DEFAULT_STEP) -> float:
        pts = np.atleast_2d(points)
        numeric = fd.central_jacobian(self.g, pts, step)
        analytic = self.g_prime(pts)
        return fd.max_abs((analytic - numeric) / np.maximum(1.0, np.abs(numeric)))

    def jet(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = np.atleast_2d(x)
        return pts, np.asarray(self.g(pts)), np.asarray(self.g_prime(pts))


def field_configuration(n: int, m: int, g, g_prime=None, step: float = 1e-6,
                        name: str = "") -> FieldConfiguration:
    if g_prime is None:
        def g_prime(x, _g=g, _s=step):
            return fd.central_jacobian(_g, x, _s)
    return FieldConfiguration(n=n, m=m, g=g, g_prime=g_prime, name=name)


def trivial_configuration(n: int) -> FieldConfiguration:
    """The m = 0 configuration used when only the base space transforms."""
    def g(x):
        return np.zeros((np.atleast_2d(x).shape[0], 0))

    def g_prime(x, _n=n):
        return np.zeros((np.atleast_2d(x).shape[0], 0, _n))

    return FieldConfiguration(n=n, m=0, g=g, g_prime=g_prime, name="trivial")


@dataclass(frozen=True)
class TransformationFamily:
    """Parametric transformations F(z, x, r, alpha) of E x G with F(0,...) = id.

    `F` maps (z (p,), x (N,n), r (N,m), alpha (N,m,n)) to a pair
    (x_z (N,n), r_z (N,m)); `dF_dz0` returns the z-derivative at z=0 split
    into E and G parts of shapes (N,n,p) and (N,m,p).

    `variation_jacobians`, when provided, returns analytic x-Jacobian
    closures for the variation fields h1 and h2 of a given configuration;
    otherwise central differences are used.
    """
    n: int
    m: int
    param_dim: int
    F: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
                tuple[np.ndarray, np.ndarray]]
    dF_dz0: Callable[[np.ndarray, np.ndarray, np.ndarray],
                     tuple[np.ndarray, np.ndarray]]
    variation_jacobians: Optional[Callable] = None
    name: str = ""

    def origin_check(self, g: FieldConfiguration, points: np.ndarray) -> float:
        """Sup-norm deviation of F(0, x, g(x), g'(x)) from (x, g(x))."""
        x, r, a = g.jet(points)
        xz, rz = self.F(np.zeros(self.param_dim), x, r, a)
        err = fd.max_abs(xz - x)
        if self.m:
            err = max(err, fd.max_abs(rz - r))
        return err

    def dz_check(self, g: FieldConfiguration, points: np.ndarray,
                 step: float = fd.DEFAULT_STEP) -> float:
        """Max relative FD error of dF_dz0 over the parameter directions."""
        x, r, a = g.jet(points)
        de, dg = self.dF_dz0(x, r, a)
        worst = 0.0
        for k in range(self.param_dim):
            z = np.zeros(self.param_dim)
            z[k] = step
            xp, rp = self.F(z, x, r, a)
            xm, rm = self.F(-z, x, r, a)
            fd_e = (xp - xm) / (2 * step)
            worst = max(worst, fd.max_abs((de[:, :, k] - fd_e)
                                          / np.maximum(1.0, np.abs(fd_e))))
            if self.m:
                fd_g = (rp - rm) / (2 * step)
                worst = max(worst, fd.max_abs((dg[:, :, k] - fd_g)
                                              / np.maximum(1.0, np.abs(fd_g))))
        return float(worst)


@dataclass(frozen=True)
class VariationFields:
    """First-order response of (x, g(x)) to the family parameter along Delta."""
    delta: np.ndarray
    h1: VectorField                              # base-space generator
    h2: Callable[[np.ndarray], np.ndarray]       # fiber variation, (N,) -> (N, m)
    h3: Callable[[np.ndarray], np.ndarray]       # x-derivative of h2, (N, m, n)


def variation_fields(family: TransformationFamily, g: FieldConfiguration,
                     delta, jac_step: float = 1e-6) -> VariationFields:
    """h1 = E-part of F'(0)Delta on the jet of g, h2 = G-part, h3 = dh2/dx."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if delta.shape[0] != family.param_dim:
        raise DimensionMismatch("Delta has wrong parameter dimension")
    if (family.n, family.m) != (g.n, g.m):
        raise DimensionMismatch("family and configuration dimensions differ")

    def h1_value(x, _f=family, _g=g, _d=delta):
        xx, r, a = _g.jet(x)
        de, _ = _f.dF_dz0(xx, r, a)
        return np.einsum("nip,p->ni", de, _d)

    def h2_value(x, _f=family, _g=g, _d=delta):
        xx, r, a = _g.jet(x)
        _, dg = _f.dF_dz0(xx, r, a)
        return np.einsum("nip,p->ni", dg, _d)

    if family.variation_jacobians is not None:
        h1_jac, h3 = family.variation_jacobians(g, delta)
    else:
        def h1_jac(x, _h=h1_value, _s=jac_step):
            return fd.central_jacobian(_h, x, _s)

        def h3(x, _h=h2_value, _s=jac_step):
            return fd.central_jacobian(_h, x, _s)

    h1 = VectorField(dim=family.n, value=h1_value, jacobian=h1_jac,
                     name=f"h1[{family.name}]")
    return VariationFields(delta=delta, h1=h1, h2=h2_value, h3=h3)


# ---------------------------------------------------------------------------
# transformed configuration and weighted family measure
# ---------------------------------------------------------------------------

def _composed_maps(family: TransformationFamily, g: FieldConfiguration, z):
    """x -> E and G parts of F(z, x, g(x), g'(x))."""
    z = np.atleast_1d(np.asarray(z, dtype=float))

    def both(x):
        xx, r, a = g.jet(x)
        return family.F(z, xx, r, a)

    def e_map(x):
        return both(x)[0]

    def g_map(x):
        return both(x)[1]

    return e_map, g_map


def _newton_invert(e_map, y: np.ndarray, n: int, tol: float = 1e-12,
                   max_iter: int = 50, jac_step: float = 1e-6) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x = y.copy()
    res = e_map(x) - y
    for _ in range(max_iter):
        norm = np.linalg.norm(res, axis=1)
        active = norm > tol
        if not np.any(active):
            return x
        jac = fd.central_jacobian(e_map, x[active], jac_step)
        det = np.linalg.det(jac)
        if np.any(det <= 0.0):
            raise InversionError("graph condition violated: E-projection Jacobian "
                                 "is not orientation-preserving on probes")
        step = np.linalg.solve(jac, res[active])
        scale = np.ones(step.shape[0])
        for _halve in range(30):
            trial = x[active] - scale[:, None] * step
            worse = np.linalg.norm(e_map(trial) - y[active], axis=1) > norm[active]
            if not np.any(worse):
                break
            scale[worse] *= 0.5
        x[active] = x[active] - scale[:, None] * step
        res = e_map(x) - y
    if np.any(np.linalg.norm(res, axis=1) > tol):
        worst = int(np.argmax(np.linalg.norm(res, axis=1)))
        raise InversionError(f"Newton inversion did not converge at {y[worst]!r}")
    return x


def transformed_field(family: TransformationFamily, g: FieldConfiguration, z,
                      newton_tol: float = 1e-12, max_iter: int = 50,
                      jac_step: float = 1e-6) -> FieldConfiguration:
    """The configuration g_z whose graph is the F(z)-image of the graph of g.

    Evaluation solves the E-projection equation by damped Newton iteration
    started at the query point.
    """
    e_map, g_map = _composed_maps(family, g, z)

    def value(y):
        x = _newton_invert(e_map, y, family.n, newton_tol, max_iter, jac_step)
        return g_map(x)

    def derivative(y):
        x = _newton_invert(e_map, y, family.n, newton_tol, max_iter, jac_step)
        je = fd.central_jacobian(e_map, x, jac_step)
        jg = fd.central_jacobian(g_map, x, jac_step)
        # rho = Jg . Je^{-1}, solved as Je^T rho^T = Jg^T
        rho_t = np.linalg.solve(np.swapaxes(je, 1, 2), np.swapaxes(jg, 1, 2))
        return np.swapaxes(rho_t, 1, 2)

    return FieldConfiguration(n=family.n, m=family.m, g=value, g_prime=derivative,
                              name=f"{g.name}@z")


@dataclass(frozen=True)
class FamilyMeasure:
    """The weighted measure phi -> integral phi(.) L(., g_z, g_z') d nu_z,
    evaluated entirely over the base measure (no inversion in the pairing
    path):

        <F(z), phi> = integral phi(e(x)) L(e(x), gamma(x), rho(x)) d nu(x)

    with e, gamma the composed E/G maps and rho = Jgamma . Je^{-1}.
    """
    family: TransformationFamily
    config: FieldConfiguration
    measure: DensityMeasure
    lagrangian: LagrangianDensity
    z: np.ndarray
    jac_step: float = 1e-6

    def weight(self, x: np.ndarray) -> np.ndarray:
        e_map, g_map = _composed_maps(self.family, self.config, self.z)
        pts = np.atleast_2d(x)
        ex = e_map(pts)
        gx = g_map(pts)
        je = fd.central_jacobian(e_map, pts, self.jac_step)
        det = np.linalg.det(je)
        if np.any(det <= 0.0):
            raise InversionError("graph condition violated inside family pairing")
        jg = fd.central_jacobian(g_map, pts, self.jac_step)
        rho = np.swapaxes(np.linalg.solve(np.swapaxes(je, 1, 2),
                                          np.swapaxes(jg, 1, 2)), 1, 2)
        return ex, self.lagrangian.value(ex, gx, rho)

    def pair(self, test_fn: TestFunction, engine: PairingEngine):
        def integrand(x, _self=self, _phi=test_fn.value):
            ex, w = _self.weight(x)
            return _phi(ex) * w
        return pair(self.measure, integrand, engine)


def family_measure(family: TransformationFamily, g: FieldConfiguration,
                   measure: DensityMeasure, lagrangian: LagrangianDensity,
                   z) -> FamilyMeasure:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape[0] != family.param_dim:
        raise DimensionMismatch("z has wrong parameter dimension")
    if lagrangian.n != family.n or lagrangian.m != family.m:
        raise DimensionMismatch("Lagrangian and family dimensions differ")
    if measure.dim != family.n:
        raise DimensionMismatch("measure lives on a space of different dimension")
    return FamilyMeasure(family=family, config=g, measure=measure,
                         lagrangian=lagrangian, z=z)


# ---------------------------------------------------------------------------
# five-term derivative formula and the FD adjudicator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Theorem1Terms:
    variant: Variant
    l1_term: np.ndarray      # L1' . h1
    l2_term: np.ndarray      # L2' . h2
    l3_term: np.ndarray      # L3' : h2'
    trace_term: np.ndarray   # L tr(h3)  or  L tr(h1')
    score_term: np.ndarray   # L beta(h2, x)  or  L beta(h1, x)
    total: np.ndarray

    def as_tuple(self):
        return (self.l1_term, self.l2_term, self.l3_term,
                self.trace_term, self.score_term)


def theorem1_evaluate(lagrangian: LagrangianDensity, g: FieldConfiguration,
                      family: TransformationFamily, measure: DensityMeasure,
                      delta, x, variant: Variant = "transport_corrected",
                      jac_step: float = 1e-6) -> Theorem1Terms:
    """Pointwise five-term value of the parameter derivative density.

    Under ``paper_literal`` the transport terms use (h3, h2) and the
    operation refuses unless dim G = dim E; under ``transport_corrected``
    they use (h1', h1).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "paper_literal" and lagrangian.m != lagrangian.n:
        raise DimensionMismatch(
            "paper_literal transport terms need dim G = dim E "
            f"(got m={lagrangian.m}, n={lagrangian.n})")
    pts, single = _as_points(x, family.n)
    vf = variation_fields(family, g, delta, jac_step)
    xx, r, a = g.jet(pts)
    h1v = vf.h1.value(pts)
    h2v = vf.h2(pts)
    h3v = vf.h3(pts)
    lval = np.asarray(lagrangian.value(xx, r, a))
    l1 = np.einsum("nd,nd->n", np.asarray(lagrangian.d_x(xx, r, a)), h1v)
    l2 = (np.einsum("nm,nm->n", np.asarray(lagrangian.d_r(xx, r, a)), h2v)
          if lagrangian.m else np.zeros(pts.shape[0]))
    l3 = (np.einsum("nmd,nmd->n", np.asarray(lagrangian.d_alpha(xx, r, a)), h3v)
          if lagrangian.m else np.zeros(pts.shape[0]))
    if variant == "paper_literal":
        trace = np.einsum("nii->n", h3v)
        score = log_derivative_along_vector(measure, h2v, pts)
    else:
        trace = np.einsum("nii->n", np.asarray(vf.h1.jacobian(pts)))
        score = log_derivative_along_vector(measure, h1v, pts)
    trace_term = lval * trace
    score_term = lval * np.asarray(score)
    total = l1 + l2 + l3 + trace_term + score_term

    def pick(arr):
        return arr[0].item() if single else arr

    return Theorem1Terms(variant=variant, l1_term=pick(l1), l2_term=pick(l2),
                         l3_term=pick(l3), trace_term=pick(trace_term),
                         score_term=pick(score_term), total=pick(total))


def family_weak_derivative_fd(lagrangian: LagrangianDensity, g: FieldConfiguration,
                              family: TransformationFamily, measure: DensityMeasure,
                              delta, test_fn: TestFunction, engine: PairingEngine,
                              fd_step: float = 1e-4):
    """Central difference in z of <F(z Delta), phi> at z = 0.

    Independent of every analytic derivative above; this is the oracle that
    adjudicates the five-term variants.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))

    def pairing(s):
        fm = family_measure(family, g, measure, lagrangian, s * delta)
        return fm.pair(test_fn, engine)

    return fd.central_difference(pairing, fd_step)


def theorem1_pairing(lagrangian: LagrangianDensity, g: FieldConfiguration,
                     family: TransformationFamily, measure: DensityMeasure,
                     delta, test_fn: TestFunction, engine: PairingEngine,
                     variant: Variant, jac_step: float = 1e-6):
    """<nu, phi * five-term total> for comparison against the FD oracle."""
    def integrand(x, _phi=test_fn.value):
        terms = theorem1_evaluate(lagrangian, g, family, measure, delta,
                                  np.atleast_2d(x), variant, jac_step)
        return _phi(np.atleast_2d(x)) * terms.total
    return pair(measure, integrand, engine)


@dataclass(frozen=True)
class NoetherReport:
    certificate_max: float
    invariance_tol: float
    status: str                   # "invariant" | "not invariant"
    residual_max: float
    residual_mean: float
    residual_tol: float
    residuals: np.ndarray
    passed: bool


def noether_residual(lagrangian: LagrangianDensity, g: FieldConfiguration,
                     family: TransformationFamily, measure: DensityMeasure,
                     delta, probe_points: np.ndarray,
                     certificate_probes: Sequence[TestFunction],
                     engine: PairingEngine,
                     variant: Variant = "transport_corrected",
                     invariance_tol: float = 1e-8,
                     residual_tol: float = 1e-6,
                     fd_step: float = 1e-4) -> NoetherReport:
    """Evaluate the five-term sum at probe points under an invariance
    certificate.

    The certificate is the max FD z-derivative of the family pairing over the
    certificate test functions; only when it passes does a small residual
    carry the symmetry meaning, otherwise the scenario is flagged.
    """
    cert = 0.0
    for phi in certificate_probes:
        val = family_weak_derivative_fd(lagrangian, g, family, measure, delta,
                                        phi, engine, fd_step)
        cert = max(cert, abs(val))
    invariant = cert <= invariance_tol
    terms = theorem1_evaluate(lagrangian, g, family, measure, delta,
                              np.atleast_2d(probe_points), variant)
    residuals = np.abs(np.asarray(terms.total))
    res_max = float(np.max(residuals))
    res_mean = float(np.mean(residuals))
    return NoetherReport(
        certificate_max=cert, invariance_tol=invariance_tol,
        status="invariant" if invariant else "not invariant",
        residual_max=res_max, residual_mean=res_mean, residual_tol=residual_tol,
        residuals=residuals, passed=invariant and res_max <= residual_tol)
