"""Named builders for measures, fields, families, Lagrangians, test
functions, and actions.

Scenario configurations refer to analytic objects by these names; nothing is
parsed from runtime expressions, so every gradient in the catalog is an
audited closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, ScenarioError
from .measures import (DensityMeasure, TestFunction, VectorField, bump,
                       coordinate, flat_measure, gaussian, plane_wave,
                       polynomial, unit)
from .noether import (FieldConfiguration, LagrangianDensity,
                      TransformationFamily, field_configuration)
from .pathspace import (CustomAction, DiscreteAction, LatticePathSpace,
                        discretize_action, harmonic_hamiltonian)


@dataclass(frozen=True)
class FlatSpace:
    """Plain R^M stand-in for desk-scale quadratic actions."""
    size: int


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

def build_gaussian(mean=(0.0,), cov=1.0) -> DensityMeasure:
    return gaussian(np.asarray(mean, dtype=float), cov)


def build_flat_box(dim: int = 1, box=((-5.0, 5.0),), log_const: float = 0.0) -> DensityMeasure:
    b = np.atleast_2d(np.asarray(box, dtype=float))
    if b.shape == (1, 2) and dim > 1:
        b = np.repeat(b, dim, axis=0)
    if b.shape != (dim, 2):
        raise DimensionMismatch("box must provide (lo, hi) per dimension")
    return flat_measure(dim, log_const=log_const, box=b)


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

def build_constant_field(vector=(1.0,)) -> VectorField:
    return VectorField.constant(np.asarray(vector, dtype=float))


def build_linear_field(matrix=((1.0,),)) -> VectorField:
    return VectorField.linear(np.asarray(matrix, dtype=float))


def build_sine_field(dim: int = 1, amplitude: float = 1.0,
                     frequency: float = 1.0) -> VectorField:
    """k_i(x) = amplitude * sin(frequency * x_{i+1 mod dim}): nonlinear with
    off-diagonal Jacobian for dim > 1."""
    def value(x, _a=amplitude, _f=frequency, _d=dim):
        x = np.asarray(x)
        return _a * np.sin(_f * np.roll(x, -1, axis=1))

    def jacobian(x, _a=amplitude, _f=frequency, _d=dim):
        x = np.asarray(x)
        jac = np.zeros((x.shape[0], _d, _d))
        cos = _a * _f * np.cos(_f * np.roll(x, -1, axis=1))
        for i in range(_d):
            jac[:, i, (i + 1) % _d] = cos[:, i]
        return jac

    return VectorField(dim=dim, value=value, jacobian=jacobian, name="sine-field")


def build_radial_field(dim: int = 1, scale: float = 1.0) -> VectorField:
    """k(x) = scale * x * exp(-|x|^2 / 4)."""
    def value(x, _s=scale):
        x = np.asarray(x)
        return _s * x * np.exp(-0.25 * np.sum(x ** 2, axis=1))[:, None]

    def jacobian(x, _s=scale, _d=dim):
        x = np.asarray(x)
        env = _s * np.exp(-0.25 * np.sum(x ** 2, axis=1))
        eye = np.eye(_d)
        return env[:, None, None] * (eye - 0.5 * np.einsum("ni,nj->nij", x, x))

    return VectorField(dim=dim, value=value, jacobian=jacobian, name="radial-field")


def build_cubic_field(dim: int = 1, coefficient: float = 1.0) -> VectorField:
    def value(x, _c=coefficient):
        return _c * np.asarray(x) ** 3

    def jacobian(x, _c=coefficient, _d=dim):
        x = np.asarray(x)
        jac = np.zeros((x.shape[0], _d, _d))
        diag = 3.0 * _c * x ** 2
        for i in range(_d):
            jac[:, i, i] = diag[:, i]
        return jac

    return VectorField(dim=dim, value=value, jacobian=jacobian, name="cubic-field")


# ---------------------------------------------------------------------------
# field configurations g: R^n -> R^m
# ---------------------------------------------------------------------------

def build_constant_config(n: int = 1, m: int = 1, level: float = 0.0) -> FieldConfiguration:
    def g(x, _m=m, _c=level):
        return np.full((np.atleast_2d(x).shape[0], _m), _c)

    def g_prime(x, _m=m, _n=n):
        return np.zeros((np.atleast_2d(x).shape[0], _m, _n))

    return FieldConfiguration(n=n, m=m, g=g, g_prime=g_prime, name=f"const({level})")


def build_linear_config(slope: float = 1.0) -> FieldConfiguration:
    """g(x) = slope * x on n = m = 1."""
    def g(x, _s=slope):
        return _s * np.atleast_2d(x)

    def g_prime(x, _s=slope):
        return np.full((np.atleast_2d(x).shape[0], 1, 1), _s)

    return FieldConfiguration(n=1, m=1, g=g, g_prime=g_prime, name="linear")


def build_square_config() -> FieldConfiguration:
    """g(x) = x^2 on n = m = 1."""
    def g(x):
        return np.atleast_2d(x) ** 2

    def g_prime(x):
        return (2.0 * np.atleast_2d(x))[:, :, None]

    return FieldConfiguration(n=1, m=1, g=g, g_prime=g_prime, name="square")


def build_product_config() -> FieldConfiguration:
    """g(x) = x1 * x2 on n = 2, m = 1."""
    def g(x):
        x = np.atleast_2d(x)
        return (x[:, 0] * x[:, 1])[:, None]

    def g_prime(x):
        x = np.atleast_2d(x)
        out = np.zeros((x.shape[0], 1, 2))
        out[:, 0, 0] = x[:, 1]
        out[:, 0, 1] = x[:, 0]
        return out

    return FieldConfiguration(n=2, m=1, g=g, g_prime=g_prime, name="product")


# ---------------------------------------------------------------------------
# transformation families
# ---------------------------------------------------------------------------

def build_identity_family(n: int = 1, m: int = 1, param_dim: int = 1) -> TransformationFamily:
    def F(z, x, r, a):
        return np.atleast_2d(x).copy(), np.atleast_2d(r).copy()

    def dF(x, r, a, _n=n, _m=m, _p=param_dim):
        nn = np.atleast_2d(x).shape[0]
        return np.zeros((nn, _n, _p)), np.zeros((nn, _m, _p))

    def var_jac(g, delta, _n=n, _m=m):
        def h1_jac(x):
            return np.zeros((np.atleast_2d(x).shape[0], _n, _n))

        def h3(x):
            return np.zeros((np.atleast_2d(x).shape[0], _m, _n))

        return h1_jac, h3

    return TransformationFamily(n=n, m=m, param_dim=param_dim, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac, name="identity-family")


def build_translation_family(directions=((1.0,),), m: int = 1) -> TransformationFamily:
    """F(z, x, r) = (x + C z, r) with C the (n, p) matrix of directions."""
    c = np.atleast_2d(np.asarray(directions, dtype=float))
    n, p = c.shape

    def F(z, x, r, a, _c=c):
        return np.atleast_2d(x) + _c @ np.atleast_1d(z), np.atleast_2d(r).copy()

    def dF(x, r, a, _c=c, _m=m):
        nn = np.atleast_2d(x).shape[0]
        de = np.broadcast_to(_c, (nn,) + _c.shape).copy()
        return de, np.zeros((nn, _m, _c.shape[1]))

    def var_jac(g, delta, _n=n, _m=m):
        def h1_jac(x):
            return np.zeros((np.atleast_2d(x).shape[0], _n, _n))

        def h3(x):
            return np.zeros((np.atleast_2d(x).shape[0], _m, _n))

        return h1_jac, h3

    return TransformationFamily(n=n, m=m, param_dim=p, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac, name="translation-family")


def build_scaling_family(n: int = 1, m: int = 0) -> TransformationFamily:
    """F(z, x, r) = ((1 + z) x, r), one parameter."""
    def F(z, x, r, a):
        s = 1.0 + float(np.atleast_1d(z)[0])
        return s * np.atleast_2d(x), np.atleast_2d(r).copy()

    def dF(x, r, a, _m=m):
        x = np.atleast_2d(x)
        return x[:, :, None], np.zeros((x.shape[0], _m, 1))

    def var_jac(g, delta, _n=n, _m=m):
        d0 = float(np.atleast_1d(delta)[0])

        def h1_jac(x, _d=d0):
            nn = np.atleast_2d(x).shape[0]
            return np.broadcast_to(_d * np.eye(_n), (nn, _n, _n)).copy()

        def h3(x):
            return np.zeros((np.atleast_2d(x).shape[0], _m, _n))

        return h1_jac, h3

    return TransformationFamily(n=n, m=m, param_dim=1, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac, name="scaling-family")


_ROTATION_GENERATOR = np.array([[0.0, -1.0], [1.0, 0.0]])


def build_rotation_family(m: int = 1) -> TransformationFamily:
    """F(z, x, r) = (R_z x, r) on n = 2, one angle parameter."""
    def F(z, x, r, a):
        t = float(np.atleast_1d(z)[0])
        rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        return np.atleast_2d(x) @ rot.T, np.atleast_2d(r).copy()

    def dF(x, r, a, _m=m):
        x = np.atleast_2d(x)
        return (x @ _ROTATION_GENERATOR.T)[:, :, None], np.zeros((x.shape[0], _m, 1))

    def var_jac(g, delta, _m=m):
        d0 = float(np.atleast_1d(delta)[0])

        def h1_jac(x, _d=d0):
            nn = np.atleast_2d(x).shape[0]
            return np.broadcast_to(_d * _ROTATION_GENERATOR, (nn, 2, 2)).copy()

        def h3(x):
            return np.zeros((np.atleast_2d(x).shape[0], _m, 2))

        return h1_jac, h3

    return TransformationFamily(n=2, m=m, param_dim=1, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac, name="rotation-family")


_ETA_KINDS = {
    "square": (lambda u: u ** 2, lambda u: 2.0 * u),
    "cube": (lambda u: u ** 3, lambda u: 3.0 * u ** 2),
    "sine": (np.sin, np.cos),
    "linear": (lambda u: u, lambda u: np.ones_like(u)),
    "one": (lambda u: np.ones_like(u), lambda u: np.zeros_like(u)),
}


def build_gshift_family(n: int = 1, eta: str = "square",
                        coefficient: float = 1.0) -> TransformationFamily:
    """Fiber shift F(z, x, r) = (x, r + z * coefficient * eta(x)) on m = 1.

    eta acts on x_1; the base space is untouched, so h1 vanishes identically.
    """
    if eta not in _ETA_KINDS:
        raise ScenarioError(f"unknown eta kind {eta!r}; choose from {sorted(_ETA_KINDS)}")
    f, fp = _ETA_KINDS[eta]

    def F(z, x, r, a, _f=f, _c=coefficient):
        x = np.atleast_2d(x)
        shift = float(np.atleast_1d(z)[0]) * _c * _f(x[:, 0])
        return x.copy(), np.atleast_2d(r) + shift[:, None]

    def dF(x, r, a, _f=f, _c=coefficient, _n=n):
        x = np.atleast_2d(x)
        de = np.zeros((x.shape[0], _n, 1))
        dg = (_c * _f(x[:, 0]))[:, None, None]
        return de, dg

    def var_jac(g, delta, _fp=fp, _c=coefficient, _n=n):
        d0 = float(np.atleast_1d(delta)[0])

        def h1_jac(x):
            return np.zeros((np.atleast_2d(x).shape[0], _n, _n))

        def h3(x, _d=d0):
            x = np.atleast_2d(x)
            out = np.zeros((x.shape[0], 1, _n))
            out[:, 0, 0] = _d * _c * _fp(x[:, 0])
            return out

        return h1_jac, h3

    return TransformationFamily(n=n, m=1, param_dim=1, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac,
                                name=f"gshift-{eta}")


def build_gshift_two_param(c1: float = 1.0, c2: float = 1.0) -> TransformationFamily:
    """F(z, x, r) = (x, r + z1 c1 x^2 + z2 c2 sin x) on n = m = 1, p = 2."""
    def F(z, x, r, a, _c1=c1, _c2=c2):
        z = np.atleast_1d(z)
        x = np.atleast_2d(x)
        shift = z[0] * _c1 * x[:, 0] ** 2 + z[1] * _c2 * np.sin(x[:, 0])
        return x.copy(), np.atleast_2d(r) + shift[:, None]

    def dF(x, r, a, _c1=c1, _c2=c2):
        x = np.atleast_2d(x)
        de = np.zeros((x.shape[0], 1, 2))
        dg = np.zeros((x.shape[0], 1, 2))
        dg[:, 0, 0] = _c1 * x[:, 0] ** 2
        dg[:, 0, 1] = _c2 * np.sin(x[:, 0])
        return de, dg

    def var_jac(g, delta, _c1=c1, _c2=c2):
        delta = np.atleast_1d(delta)

        def h1_jac(x):
            return np.zeros((np.atleast_2d(x).shape[0], 1, 1))

        def h3(x, _d=delta):
            x = np.atleast_2d(x)
            out = np.zeros((x.shape[0], 1, 1))
            out[:, 0, 0] = _d[0] * _c1 * 2.0 * x[:, 0] + _d[1] * _c2 * np.cos(x[:, 0])
            return out

        return h1_jac, h3

    return TransformationFamily(n=1, m=1, param_dim=2, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac, name="gshift-2param")


def build_gshift_quadsum_family() -> TransformationFamily:
    """F(z, x, r) = (x, r + z (x1^2 + x2)) on n = 2, m = 1."""
    def F(z, x, r, a):
        x = np.atleast_2d(x)
        shift = float(np.atleast_1d(z)[0]) * (x[:, 0] ** 2 + x[:, 1])
        return x.copy(), np.atleast_2d(r) + shift[:, None]

    def dF(x, r, a):
        x = np.atleast_2d(x)
        de = np.zeros((x.shape[0], 2, 1))
        dg = (x[:, 0] ** 2 + x[:, 1])[:, None, None]
        return de, dg

    def var_jac(g, delta):
        d0 = float(np.atleast_1d(delta)[0])

        def h1_jac(x):
            return np.zeros((np.atleast_2d(x).shape[0], 2, 2))

        def h3(x, _d=d0):
            x = np.atleast_2d(x)
            out = np.zeros((x.shape[0], 1, 2))
            out[:, 0, 0] = _d * 2.0 * x[:, 0]
            out[:, 0, 1] = _d
            return out

        return h1_jac, h3

    return TransformationFamily(n=2, m=1, param_dim=1, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac, name="gshift-quadsum")


# path-space families (trivial fiber, m = 0)

def build_path_scaling_family(size: int) -> TransformationFamily:
    fam = build_scaling_family(n=size, m=0)
    return fam


def build_path_translation_family(direction) -> TransformationFamily:
    c = np.atleast_1d(np.asarray(direction, dtype=float))
    return build_translation_family(directions=c[:, None], m=0)


def build_desk_generator_family(steps: int = 1) -> TransformationFamily:
    """Blockwise generator k(Q_j, P_j) = (Q_j^2, -Q_j P_j) on a d = 1 lattice,
    realized as the first-order family F(z, path) = path + z k(path).

    Layout matches LatticePathSpace: the first `steps` coordinates are Q,
    the rest P.
    """
    n = 2 * steps

    def k(path, _s=steps):
        path = np.atleast_2d(path)
        q, p = path[:, :_s], path[:, _s:]
        return np.concatenate([q ** 2, -q * p], axis=1)

    def F(z, x, r, a):
        x = np.atleast_2d(x)
        return x + float(np.atleast_1d(z)[0]) * k(x), np.atleast_2d(r).copy()

    def dF(x, r, a):
        x = np.atleast_2d(x)
        return k(x)[:, :, None], np.zeros((x.shape[0], 0, 1))

    def var_jac(g, delta, _s=steps, _n=n):
        d0 = float(np.atleast_1d(delta)[0])

        def h1_jac(x, _d=d0):
            x = np.atleast_2d(x)
            q, p = x[:, :_s], x[:, _s:]
            jac = np.zeros((x.shape[0], _n, _n))
            for j in range(_s):
                jac[:, j, j] = 2.0 * q[:, j] * _d
                jac[:, _s + j, _s + j] = -q[:, j] * _d
                jac[:, _s + j, j] = -p[:, j] * _d
            return jac

        def h3(x):
            return np.zeros((np.atleast_2d(x).shape[0], 0, _n))

        return h1_jac, h3

    return TransformationFamily(n=n, m=0, param_dim=1, F=F, dF_dz0=dF,
                                variation_jacobians=var_jac,
                                name="desk-generator-family")


# ---------------------------------------------------------------------------
# Lagrangian densities
# ---------------------------------------------------------------------------

def _zeros_like_shape(x, *shape):
    return np.zeros((np.atleast_2d(x).shape[0],) + shape)


def build_unit_lagrangian(n: int = 1, m: int = 1) -> LagrangianDensity:
    return LagrangianDensity(
        n=n, m=m,
        value=lambda x, r, a: np.ones(np.atleast_2d(x).shape[0]),
        d_x=lambda x, r, a: _zeros_like_shape(x, n),
        d_r=lambda x, r, a: _zeros_like_shape(x, m),
        d_alpha=lambda x, r, a: _zeros_like_shape(x, m, n),
        name="unit")


def build_power_r_lagrangian(n: int = 1, power: int = 2) -> LagrangianDensity:
    """L(x, r, alpha) = r^power on m = 1."""
    def value(x, r, a, _p=power):
        return np.atleast_2d(r)[:, 0] ** _p

    def d_r(x, r, a, _p=power):
        return (_p * np.atleast_2d(r)[:, 0] ** (_p - 1))[:, None]

    return LagrangianDensity(
        n=n, m=1, value=value,
        d_x=lambda x, r, a: _zeros_like_shape(x, n),
        d_r=d_r,
        d_alpha=lambda x, r, a: _zeros_like_shape(x, 1, n),
        name=f"r^{power}")


def build_r2_alpha2_lagrangian(n: int = 1) -> LagrangianDensity:
    """L = r^2 + |alpha|^2 (Frobenius) on m = 1."""
    def value(x, r, a):
        r = np.atleast_2d(r)
        a = np.asarray(a)
        return r[:, 0] ** 2 + np.sum(a ** 2, axis=(1, 2))

    def d_r(x, r, a):
        return 2.0 * np.atleast_2d(r)

    def d_alpha(x, r, a):
        return 2.0 * np.asarray(a)

    return LagrangianDensity(
        n=n, m=1, value=value,
        d_x=lambda x, r, a: _zeros_like_shape(x, n),
        d_r=d_r, d_alpha=d_alpha, name="r^2+|alpha|^2")


def build_poly_x_lagrangian(n: int = 1, m: int = 1) -> LagrangianDensity:
    """L = 1 + |x|^2."""
    def value(x, r, a):
        x = np.atleast_2d(x)
        return 1.0 + np.sum(x ** 2, axis=1)

    def d_x(x, r, a):
        return 2.0 * np.atleast_2d(x)

    return LagrangianDensity(
        n=n, m=m, value=value, d_x=d_x,
        d_r=lambda x, r, a: _zeros_like_shape(x, m),
        d_alpha=lambda x, r, a: _zeros_like_shape(x, m, n),
        name="1+|x|^2")


def build_gauss_x_lagrangian(n: int = 1, m: int = 1) -> LagrangianDensity:
    """L = exp(-|x|^2)."""
    def value(x, r, a):
        x = np.atleast_2d(x)
        return np.exp(-np.sum(x ** 2, axis=1))

    def d_x(x, r, a):
        x = np.atleast_2d(x)
        return -2.0 * x * value(x, r, a)[:, None]

    return LagrangianDensity(
        n=n, m=m, value=value, d_x=d_x,
        d_r=lambda x, r, a: _zeros_like_shape(x, m),
        d_alpha=lambda x, r, a: _zeros_like_shape(x, m, n),
        name="exp(-|x|^2)")


def build_exp_ir_lagrangian(n: int = 1) -> LagrangianDensity:
    """L = exp(i r) on m = 1 (complex weight)."""
    def value(x, r, a):
        return np.exp(1j * np.atleast_2d(r)[:, 0])

    def d_r(x, r, a):
        return (1j * value(x, r, a))[:, None]

    return LagrangianDensity(
        n=n, m=1, value=value,
        d_x=lambda x, r, a: _zeros_like_shape(x, n).astype(complex),
        d_r=d_r,
        d_alpha=lambda x, r, a: _zeros_like_shape(x, 1, n).astype(complex),
        name="exp(ir)")


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------

def build_xy_desk_action() -> DiscreteAction:
    """d = 1, one step, zero Hamiltonian: phase exponent = -Q1 P1 = -xy."""
    space = LatticePathSpace(dof=1, steps=1, t_total=1.0)
    return discretize_action(space, hamiltonian=None, offset_q=None)


def build_block_desk_action(steps: int = 1) -> CustomAction:
    """Direct sum of `steps` desk models: exponent = -sum_j Q_j P_j."""
    space = LatticePathSpace(dof=1, steps=steps, t_total=1.0)
    s = steps

    def exponent(path, _s=s):
        path = np.atleast_2d(path)
        return -np.sum(path[:, :_s] * path[:, _s:], axis=1)

    def gradient(path, _s=s):
        path = np.atleast_2d(path)
        return -np.concatenate([path[:, _s:], path[:, :_s]], axis=1)

    m = 2 * s
    a = np.zeros((m, m))
    for j in range(s):
        a[j, s + j] = -1.0
        a[s + j, j] = -1.0
    return CustomAction(space=space, phase_exponent=exponent,
                        exponent_gradient=gradient,
                        quadratic_data=(a, np.zeros(m), 0.0))


def build_quadratic_action(matrix, lin=None, const: float = 0.0) -> CustomAction:
    """Desk-scale quadratic exponent x'Ax/2 + b.x + c on R^M."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    m = a.shape[0]
    if a.shape != (m, m):
        raise DimensionMismatch("action matrix must be square")
    a = 0.5 * (a + a.T)
    b = np.zeros(m) if lin is None else np.atleast_1d(np.asarray(lin, dtype=float))

    def exponent(x, _a=a, _b=b, _c=const):
        x = np.atleast_2d(x)
        return 0.5 * np.einsum("nd,de,ne->n", x, _a, x) + x @ _b + _c

    def gradient(x, _a=a, _b=b):
        return np.atleast_2d(x) @ _a.T + _b

    return CustomAction(space=FlatSpace(size=m), phase_exponent=exponent,
                        exponent_gradient=gradient, quadratic_data=(a, b, const))


def build_harmonic_action(dof: int = 1, steps: int = 2, t_total: float = 1.0,
                          omega: float = 1.0, mass: float = 1.0,
                          offset=None) -> DiscreteAction:
    space = LatticePathSpace(dof=dof, steps=steps, t_total=t_total)
    return discretize_action(space, harmonic_hamiltonian(dof, omega, mass), offset)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

def build_polynomial(dim: int = 1, terms=((1.0, (0,)),), decay: float = 0.0,
                     name: str = "") -> TestFunction:
    parsed = [(complex(c).real if complex(c).imag == 0 else complex(c), tuple(e))
              for c, e in terms]
    return polynomial(dim, parsed, decay=decay, name=name)


def build_bump(dim: int = 1, radius: float = 1.0, center=None) -> TestFunction:
    return bump(dim, radius=radius, center=center)


def build_plane_wave(dim: int = 1, wave_vector=(1.0,)) -> TestFunction:
    return plane_wave(dim, wave_vector)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BuiltinSpec:
    kind: str
    build: Callable
    params: dict
    summary: str


CATALOG: dict[str, BuiltinSpec] = {
    "gaussian": BuiltinSpec(
        "measure", build_gaussian,
        {"mean": "center vector (default [0.0])",
         "cov": "scalar, diagonal vector, or full matrix (default 1.0)"},
        "normalized Gaussian measure with exact sampler"),
    "flat-box": BuiltinSpec(
        "measure", build_flat_box,
        {"dim": "dimension (default 1)",
         "box": "per-axis [lo, hi] rows (a single row is repeated)",
         "log_const": "constant log-density (default 0.0)"},
        "translation-invariant measure paired over a bounded box"),
    "constant-field": BuiltinSpec(
        "field", build_constant_field, {"vector": "the constant value"},
        "k(x) = h with zero Jacobian"),
    "linear-field": BuiltinSpec(
        "field", build_linear_field, {"matrix": "square matrix A"},
        "k(x) = A x"),
    "sine-field": BuiltinSpec(
        "field", build_sine_field,
        {"dim": "dimension", "amplitude": "scale", "frequency": "frequency"},
        "k_i(x) = a sin(f x_{i+1 mod d})"),
    "radial-field": BuiltinSpec(
        "field", build_radial_field, {"dim": "dimension", "scale": "scale"},
        "k(x) = s x exp(-|x|^2/4)"),
    "cubic-field": BuiltinSpec(
        "field", build_cubic_field,
        {"dim": "dimension", "coefficient": "scale"},
        "k_i(x) = c x_i^3"),
    "constant-config": BuiltinSpec(
        "config", build_constant_config,
        {"n": "base dimension", "m": "fiber dimension", "level": "constant value"},
        "g = const"),
    "linear-config": BuiltinSpec(
        "config", build_linear_config, {"slope": "slope"}, "g(x) = s x (n=m=1)"),
    "square-config": BuiltinSpec(
        "config", build_square_config, {}, "g(x) = x^2 (n=m=1)"),
    "product-config": BuiltinSpec(
        "config", build_product_config, {}, "g(x) = x1 x2 (n=2, m=1)"),
    "identity-family": BuiltinSpec(
        "family", build_identity_family,
        {"n": "base dim", "m": "fiber dim", "param_dim": "parameter dim"},
        "constant-in-z family, all variations vanish"),
    "translation-family": BuiltinSpec(
        "family", build_translation_family,
        {"directions": "(n, p) direction matrix", "m": "fiber dim"},
        "x -> x + C z"),
    "scaling-family": BuiltinSpec(
        "family", build_scaling_family, {"n": "dimension", "m": "fiber dim"},
        "x -> (1+z) x"),
    "rotation-family": BuiltinSpec(
        "family", build_rotation_family, {"m": "fiber dim"},
        "planar rotation by angle z"),
    "gshift-family": BuiltinSpec(
        "family", build_gshift_family,
        {"n": "base dim", "eta": "square|cube|sine|linear|one",
         "coefficient": "scale"},
        "fiber shift r -> r + z c eta(x1)"),
    "gshift-2param": BuiltinSpec(
        "family", build_gshift_two_param,
        {"c1": "x^2 coefficient", "c2": "sin coefficient"},
        "two-parameter fiber shift"),
    "gshift-quadsum": BuiltinSpec(
        "family", build_gshift_quadsum_family, {},
        "fiber shift by z (x1^2 + x2) on n=2"),
    "desk-generator-family": BuiltinSpec(
        "family", build_desk_generator_family, {"steps": "lattice steps"},
        "blockwise (Q^2, -QP) generator on a d=1 lattice"),
    "path-scaling-family": BuiltinSpec(
        "family", build_path_scaling_family, {"size": "path dimension M"},
        "uniform scaling of paths"),
    "unit-lagrangian": BuiltinSpec(
        "lagrangian", build_unit_lagrangian,
        {"n": "base dim", "m": "fiber dim"}, "L = 1"),
    "power-r": BuiltinSpec(
        "lagrangian", build_power_r_lagrangian,
        {"n": "base dim", "power": "exponent"}, "L = r^power"),
    "r2-alpha2": BuiltinSpec(
        "lagrangian", build_r2_alpha2_lagrangian, {"n": "base dim"},
        "L = r^2 + |alpha|^2"),
    "poly-x": BuiltinSpec(
        "lagrangian", build_poly_x_lagrangian,
        {"n": "base dim", "m": "fiber dim"}, "L = 1 + |x|^2"),
    "gauss-x": BuiltinSpec(
        "lagrangian", build_gauss_x_lagrangian,
        {"n": "base dim", "m": "fiber dim"}, "L = exp(-|x|^2)"),
    "exp-ir": BuiltinSpec(
        "lagrangian", build_exp_ir_lagrangian, {"n": "base dim"},
        "L = exp(i r), complex weight"),
    "xy-desk-action": BuiltinSpec(
        "action", build_xy_desk_action, {},
        "one-step d=1 lattice, exponent -Q1 P1"),
    "block-desk-action": BuiltinSpec(
        "action", build_block_desk_action, {"steps": "number of desk blocks"},
        "direct sum of desk models"),
    "quadratic-action": BuiltinSpec(
        "action", build_quadratic_action,
        {"matrix": "symmetric matrix A", "lin": "linear term b",
         "const": "constant"},
        "exponent x'Ax/2 + b.x + c on R^M"),
    "harmonic-action": BuiltinSpec(
        "action", build_harmonic_action,
        {"dof": "degrees of freedom", "steps": "lattice steps",
         "t_total": "time horizon", "omega": "frequency", "mass": "mass",
         "offset": "boundary offset q"},
        "lattice action of the harmonic oscillator"),
    "polynomial": BuiltinSpec(
        "testfn", build_polynomial,
        {"dim": "dimension", "terms": "[[coeff, [exponents]], ...]",
         "decay": "Gaussian envelope rate (default 0)"},
        "polynomial times optional Gaussian envelope"),
    "bump": BuiltinSpec(
        "testfn", build_bump,
        {"dim": "dimension", "radius": "support radius", "center": "center"},
        "smooth compactly supported bump"),
    "plane-wave": BuiltinSpec(
        "testfn", build_plane_wave,
        {"dim": "dimension", "wave_vector": "frequency vector"},
        "exp(i <k, x>)"),
}

KINDS = tuple(sorted({spec.kind for spec in CATALOG.values()}))


def build(name: str, params: Optional[dict] = None):
    """Instantiate a catalog entry by name with keyword parameters."""
    if name not in CATALOG:
        raise ScenarioError(f"unknown builtin {name!r}")
    try:
        return CATALOG[name].build(**(params or {}))
    except TypeError as exc:
        raise ScenarioError(f"bad parameters for builtin {name!r}: {exc}") from exc


def catalog_lines(kind: Optional[str] = None) -> list[str]:
    if kind is not None and kind not in KINDS:
        raise ScenarioError(f"unknown builtin kind {kind!r}; choose from {KINDS}")
    lines = []
    for name in sorted(CATALOG):
        spec = CATALOG[name]
        if kind is not None and spec.kind != kind:
            continue
        lines.append(f"{name} [{spec.kind}] - {spec.summary}")
        for pname, pdesc in spec.params.items():
            lines.append(f"    {pname}: {pdesc}")
    return lines
