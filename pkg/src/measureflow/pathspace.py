"""Lattice-discretized phase-space path integrals.

A path over d degrees of freedom and N time steps is a point in R^M with
M = 2dN, laid out as (Q_1..Q_N, P_1..P_N).  The phase exponent of the
integrand is

    exponent = sum_j h(Q_j + q, P_j) dt  -  sum_j <Q_j - Q_{j-1}, P_j>

with Q_0 := 0 (paths pinned at the start, offset carried by q), so that the
weight exp(i * exponent) carries the Hamiltonian phase forward and the
kinetic phase with a minus sign.  Midpoint sampling of P in the kinetic sum
is available as a configuration alternative.

The reference measure on path space is the flat measure on R^M; oscillatory
pairings are defined through the damping exp(-eps |path|^2 / 2) with closed
complex-Gaussian evaluation for quadratic exponents and dense quadrature
cross-checks.

The anomaly of a transformation family is the logarithmic derivative of the
flat measure along the family's generator: the Jacobian trace tr h1'(path).
It is computed literally as `log_derivative_along_field` of a flat measure,
so the reduction to the general formula is exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import fd
from .errors import DimensionMismatch, EngineConfigError
from .measures import (DensityMeasure, PairingEngine, PairingEstimate, Sampler,
                       TestFunction, flat_measure, log_derivative_along_field,
                       pair, pair_estimate)
from .noether import TransformationFamily, trivial_configuration, variation_fields

DAMPING_LOG_CUTOFF = 40.0      # box half-width X solves eps X^2 / 2 = cutoff
MAX_GRID_POINTS = 20_000_000
MAX_DETERMINISTIC_DIM = 12


@dataclass(frozen=True)
class LatticePathSpace:
    dof: int
    steps: int
    t_total: float

    def __post_init__(self):
        if self.dof < 1 or self.steps < 1:
            raise DimensionMismatch("dof and steps must be positive")
        if self.t_total <= 0:
            raise ValueError("t_total must be positive")

    @property
    def dt(self) -> float:
        return self.t_total / self.steps

    @property
    def size(self) -> int:
        return 2 * self.dof * self.steps

    def split(self, path: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(N, M) -> Q (N, steps, dof) and P (N, steps, dof)."""
        p = np.atleast_2d(np.asarray(path, dtype=float))
        if p.shape[1] != self.size:
            raise DimensionMismatch(f"path length {p.shape[1]} != M = {self.size}")
        half = self.dof * self.steps
        q = p[:, :half].reshape(-1, self.steps, self.dof)
        pp = p[:, half:].reshape(-1, self.steps, self.dof)
        return q, pp

    def join(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        n = q.shape[0]
        return np.concatenate([q.reshape(n, -1), p.reshape(n, -1)], axis=1)


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """h(q, p) = q'Hqq q/2 + q'Hqp p + p'Hpp p/2 + lq.q + lp.p + const."""
    h_qq: np.ndarray
    h_qp: np.ndarray
    h_pp: np.ndarray
    lin_q: np.ndarray
    lin_p: np.ndarray
    const: float = 0.0

    def value(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        out = 0.5 * np.einsum("nd,de,ne->n", q, self.h_qq, q)
        out += np.einsum("nd,de,ne->n", q, self.h_qp, p)
        out += 0.5 * np.einsum("nd,de,ne->n", p, self.h_pp, p)
        out += q @ self.lin_q + p @ self.lin_p + self.const
        return out

    def gradient(self, q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dq = q @ self.h_qq.T + p @ self.h_qp.T + self.lin_q
        dp = q @ self.h_qp + p @ self.h_pp.T + self.lin_p
        return dq, dp


def harmonic_hamiltonian(dof: int, omega: float = 1.0, mass: float = 1.0) -> QuadraticHamiltonian:
    eye = np.eye(dof)
    return QuadraticHamiltonian(h_qq=mass * omega ** 2 * eye, h_qp=np.zeros((dof, dof)),
                                h_pp=eye / mass, lin_q=np.zeros(dof),
                                lin_p=np.zeros(dof), const=0.0)


@dataclass(frozen=True)
class GenericHamiltonian:
    """Non-quadratic Hamiltonian: batched value and (grad_q, grad_p)."""
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


Hamiltonian = Union[QuadraticHamiltonian, GenericHamiltonian, None]


@dataclass(frozen=True)
class DiscreteAction:
    """Time-lattice action data with analytic gradient.

    `phase_exponent` is the quantity multiplied by i in the path weight:
    Hamiltonian term minus kinetic term.
    """
    space: LatticePathSpace
    hamiltonian: Hamiltonian
    offset_q: np.ndarray
    p_sampling: str = "forward"   # or "midpoint"

    def kinetic(self, path: np.ndarray) -> np.ndarray:
        q, p = self.space.split(path)
        dq = np.diff(np.concatenate([np.zeros_like(q[:, :1]), q], axis=1), axis=1)
        if self.p_sampling == "forward":
            weights = p
        else:
            prev = np.concatenate([p[:, :1], p[:, :-1]], axis=1)
            weights = 0.5 * (p + prev)
        return np.einsum("njd,njd->n", dq, weights)

    def hamiltonian_term(self, path: np.ndarray) -> np.ndarray:
        q, p = self.space.split(path)
        if self.hamiltonian is None:
            return np.zeros(q.shape[0])
        n, steps, dof = q.shape
        vals = self.hamiltonian.value((q + self.offset_q).reshape(-1, dof),
                                      p.reshape(-1, dof))
        return vals.reshape(n, steps).sum(axis=1) * self.space.dt

    def phase_exponent(self, path: np.ndarray) -> np.ndarray:
        return self.hamiltonian_term(path) - self.kinetic(path)

    def exponent_gradient(self, path: np.ndarray) -> np.ndarray:
        q, p = self.space.split(path)
        n, steps, dof = q.shape
        gq = np.zeros_like(q)
        gp = np.zeros_like(p)
        if self.hamiltonian is not None:
            dq, dp = self.hamiltonian.gradient((q + self.offset_q).reshape(-1, dof),
                                               p.reshape(-1, dof))
            gq += dq.reshape(n, steps, dof) * self.space.dt
            gp += dp.reshape(n, steps, dof) * self.space.dt
        # minus the kinetic gradient
        dqs = np.diff(np.concatenate([np.zeros_like(q[:, :1]), q], axis=1), axis=1)
        if self.p_sampling == "forward":
            nxt = np.concatenate([p[:, 1:], np.zeros_like(p[:, :1])], axis=1)
            gq -= p - nxt
            gp -= dqs
        else:
            prev = np.concatenate([p[:, :1], p[:, :-1]], axis=1)
            mid = 0.5 * (p + prev)
            nxt_mid = np.concatenate([mid[:, 1:], np.zeros_like(mid[:, :1])], axis=1)
            gq -= mid - nxt_mid
            half_next = np.concatenate([0.5 * dqs[:, 1:], np.zeros_like(dqs[:, :1])], axis=1)
            gp -= 0.5 * dqs + half_next
            gp[:, 0] -= 0.5 * dqs[:, 0]   # P_0 := P_1 doubles the first weight
        return self.space.join(gq, gp)

    @property
    def is_quadratic(self) -> bool:
        return (self.hamiltonian is None
                or isinstance(self.hamiltonian, QuadraticHamiltonian))

    def quadratic_form(self) -> tuple[np.ndarray, np.ndarray, float]:
        """exponent(x) = x'Ax/2 + b.x + c for quadratic Hamiltonians
        (forward kinetic rule only)."""
        if not self.is_quadratic:
            raise EngineConfigError("action is not quadratic")
        if self.p_sampling != "forward":
            raise EngineConfigError("quadratic form assembled for the forward rule only")
        space = self.space
        d, steps, dt = space.dof, space.steps, space.dt
        m = space.size
        a = np.zeros((m, m))
        b = np.zeros(m)
        c = 0.0

        def qi(j):
            return slice(j * d, (j + 1) * d)

        def pi(j):
            off = d * steps
            return slice(off + j * d, off + (j + 1) * d)

        h = self.hamiltonian
        if h is not None:
            qoff = self.offset_q
            for j in range(steps):
                a[qi(j), qi(j)] += dt * h.h_qq
                a[qi(j), pi(j)] += dt * h.h_qp
                a[pi(j), qi(j)] += dt * h.h_qp.T
                a[pi(j), pi(j)] += dt * h.h_pp
                b[qi(j)] += dt * (h.h_qq @ qoff + h.lin_q)
                b[pi(j)] += dt * (h.h_qp.T @ qoff + h.lin_p)
                c += dt * (0.5 * qoff @ h.h_qq @ qoff + h.lin_q @ qoff + h.const)
        eye = np.eye(d)
        for j in range(steps):
            a[qi(j), pi(j)] -= eye
            a[pi(j), qi(j)] -= eye
            if j >= 1:
                a[qi(j - 1), pi(j)] += eye
                a[pi(j), qi(j - 1)] += eye
        return a, b, c

    def gradient_check(self, paths: np.ndarray, step: float = fd.DEFAULT_STEP) -> float:
        pts = np.atleast_2d(paths)
        numeric = fd.central_gradient(self.phase_exponent, pts, step)
        analytic = self.exponent_gradient(pts)
        return fd.max_abs((analytic - numeric) / np.maximum(1.0, np.abs(numeric)))


def discretize_action(space: LatticePathSpace, hamiltonian: Hamiltonian = None,
                      offset_q=None, p_sampling: str = "forward") -> DiscreteAction:
    if p_sampling not in ("forward", "midpoint"):
        raise ValueError("p_sampling must be 'forward' or 'midpoint'")
    q = np.zeros(space.dof) if offset_q is None else np.atleast_1d(
        np.asarray(offset_q, dtype=float))
    if q.shape[0] != space.dof:
        raise DimensionMismatch("offset has wrong dimension")
    return DiscreteAction(space=space, hamiltonian=hamiltonian, offset_q=q,
                          p_sampling=p_sampling)


@dataclass(frozen=True)
class CustomAction:
    """Escape hatch for desk models: exponent and gradient supplied directly."""
    space: LatticePathSpace
    phase_exponent: Callable[[np.ndarray], np.ndarray]
    exponent_gradient: Callable[[np.ndarray], np.ndarray]
    quadratic_data: Optional[tuple[np.ndarray, np.ndarray, float]] = None

    @property
    def is_quadratic(self) -> bool:
        return self.quadratic_data is not None

    def quadratic_form(self):
        if self.quadratic_data is None:
            raise EngineConfigError("action is not quadratic")
        return self.quadratic_data

    def gradient_check(self, paths: np.ndarray, step: float = fd.DEFAULT_STEP) -> float:
        pts = np.atleast_2d(paths)
        numeric = fd.central_gradient(self.phase_exponent, pts, step)
        analytic = self.exponent_gradient(pts)
        return fd.max_abs((analytic - numeric) / np.maximum(1.0, np.abs(numeric)))


Action = Union[DiscreteAction, CustomAction]


# ---------------------------------------------------------------------------
# Feynman weights and regularized pairings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeynmanWeight:
    """exp(i exponent) * f(Q_N + q) * exp(-eps |path|^2 / 2) on R^M."""
    action: Action
    initial_data: Optional[TestFunction] = None   # lives on R^dof
    epsilon: float = 0.1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise EngineConfigError("regularization epsilon must be positive")

    def phase(self, path: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.action.phase_exponent(np.atleast_2d(path)))

    def _f_values(self, path: np.ndarray) -> np.ndarray:
        if self.initial_data is None:
            return np.ones(np.atleast_2d(path).shape[0])
        space = self.action.space
        q, _ = space.split(path)
        endpoint = q[:, -1, :] + getattr(self.action, "offset_q", np.zeros(space.dof))
        return self.initial_data.value(endpoint)

    def undamped(self, path: np.ndarray) -> np.ndarray:
        return self.phase(path) * self._f_values(path)

    def integrand(self, path: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(path)
        damp = np.exp(-0.5 * self.epsilon * np.sum(p ** 2, axis=1))
        return self.undamped(p) * damp


@dataclass(frozen=True)
class QuadraticObservable:
    """phi(x) = const + lin.x + x'quad x (quad not halved)."""
    dim: int
    const: complex = 1.0
    lin: Optional[np.ndarray] = None
    quad: Optional[np.ndarray] = None

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.full(x.shape[0], self.const, dtype=complex)
        if self.lin is not None:
            out = out + x @ self.lin
        if self.quad is not None:
            out = out + np.einsum("nd,de,ne->n", x, self.quad, x)
        if np.all(out.imag == 0.0):
            return out.real
        return out


def unit_observable(dim: int) -> QuadraticObservable:
    return QuadraticObservable(dim=dim, const=1.0)


def _weight_quadratic_form(weight: FeynmanWeight) -> tuple[np.ndarray, np.ndarray, float]:
    """Quadratic data of the full undamped exponent, folding in plane-wave f."""
    a, b, c = weight.action.quadratic_form()
    if weight.initial_data is not None:
        if weight.initial_data.family_tag != "plane_wave":
            raise EngineConfigError("closed form supports f = 1 or a plane wave")
        # recover the wave vector from the analytic gradient at the origin
        space = weight.action.space
        k = weight.initial_data.gradient(np.zeros((1, space.dof)))[0].imag
        offset = getattr(weight.action, "offset_q", np.zeros(space.dof))
        b = b.copy()
        half = space.dof * space.steps
        b[half - space.dof:half] += k
        c = c + float(k @ offset)
    return a, b, c


def fresnel_pair_closed_form(weight: FeynmanWeight,
                             observable: Optional[QuadraticObservable] = None) -> complex:
    """Exact complex-Gaussian value of the damped pairing for quadratic
    exponents and polynomial observables of degree <= 2.

    With Sigma = eps I - i A (positive-definite real part), the base integral
    is (2 pi)^{M/2} prod_k (eps - i lambda_k)^{-1/2} with principal branches
    taken factor by factor, and moments follow from the complex covariance
    Sigma^{-1}.
    """
    if not weight.action.is_quadratic:
        raise EngineConfigError("closed form requires a quadratic action")
    a, b, c = _weight_quadratic_form(weight)
    m = a.shape[0]
    lam, rot = np.linalg.eigh(a)
    factors = weight.epsilon - 1j * lam
    log_z = 0.5 * m * math.log(2.0 * math.pi) - 0.5 * np.sum(np.log(factors))
    inv_diag = 1.0 / factors
    u = 1j * b
    u_rot = rot.T @ u
    mu = rot @ (inv_diag * u_rot)
    log_z = log_z + 0.5 * np.sum(inv_diag * u_rot ** 2) + 1j * c
    base = np.exp(log_z)
    if observable is None:
        return complex(base)
    if observable.dim != m:
        raise DimensionMismatch("observable dimension != path dimension")
    mean_phi = observable.const
    if observable.lin is not None:
        mean_phi = mean_phi + observable.lin @ mu
    if observable.quad is not None:
        q_rot = rot.T @ observable.quad @ rot
        mean_phi = mean_phi + np.sum(np.diag(q_rot) * inv_diag) + mu @ observable.quad @ mu
    return complex(base * mean_phi)


def damped_flat_measure(dim: int, epsilon: float, box=None) -> DensityMeasure:
    """The eps-regularized flat measure exp(-eps |x|^2/2) dx on R^M.

    Carries a Gaussian frame (for Gauss-Hermite pairings), a default box
    sized so the damping falls below exp(-DAMPING_LOG_CUTOFF), and an exact
    sampler (for Monte Carlo pairings).
    """
    half_width = math.sqrt(2.0 * DAMPING_LOG_CUTOFF / epsilon)
    if box is None:
        box = np.repeat(np.array([[-half_width, half_width]]), dim, axis=0)

    def log_density(x, _e=epsilon):
        return -0.5 * _e * np.sum(np.asarray(x) ** 2, axis=1)

    def gradient(x, _e=epsilon):
        return -_e * np.asarray(x)

    sigma = 1.0 / epsilon
    log_norm = -0.5 * dim * math.log(2.0 * math.pi * sigma)

    def log_pdf(x, _e=epsilon, _c=log_norm):
        return _c - 0.5 * _e * np.sum(np.asarray(x) ** 2, axis=1)

    def draw(rng, n, _s=math.sqrt(sigma), _d=dim):
        return _s * rng.standard_normal((n, _d))

    return DensityMeasure(
        dim=dim, log_density=log_density, log_density_gradient=gradient,
        kind="unnormalized", sampler=Sampler(draw=draw, log_pdf=log_pdf),
        gh_frame=(np.zeros(dim), math.sqrt(sigma) * np.eye(dim)),
        box=np.asarray(box, dtype=float), name=f"damped_flat(eps={epsilon})")


def _observable_values(observable, x: np.ndarray) -> np.ndarray:
    if observable is None:
        return np.ones(x.shape[0])
    if isinstance(observable, (QuadraticObservable, TestFunction)):
        return observable.value(x)
    return observable(x)


def fresnel_pair_quadrature(weight: FeynmanWeight, observable,
                            engine: PairingEngine) -> complex:
    """Damped pairing by dense quadrature (or seeded Monte Carlo) on R^M."""
    m = weight.action.space.size
    if engine.mode != "monte_carlo":
        if m > MAX_DETERMINISTIC_DIM:
            raise EngineConfigError(
                f"deterministic quadrature refused for M = {m} > "
                f"{MAX_DETERMINISTIC_DIM}; use a monte_carlo engine")
        if engine.order_or_samples ** m > MAX_GRID_POINTS:
            raise EngineConfigError(
                f"grid of {engine.order_or_samples}^{m} points exceeds the cap; "
                "lower the order or use a monte_carlo engine")
    damped = damped_flat_measure(m, weight.epsilon,
                                 box=engine.box if engine.box is not None else None)

    def integrand(x, _w=weight, _obs=observable):
        return _observable_values(_obs, x) * _w.undamped(x)

    return pair(damped, integrand, engine)


def fresnel_pair_estimate(weight: FeynmanWeight, observable,
                          engine: PairingEngine) -> PairingEstimate:
    """Monte Carlo variant returning the standard-error estimate."""
    m = weight.action.space.size
    damped = damped_flat_measure(m, weight.epsilon)

    def integrand(x, _w=weight, _obs=observable):
        return _observable_values(_obs, x) * _w.undamped(x)

    return pair_estimate(damped, integrand, engine)


def fresnel_pair(weight: FeynmanWeight, observable, engine: PairingEngine) -> complex:
    """Dispatch: closed form for quadratic exponents with degree-<=2
    observables, otherwise damped quadrature / Monte Carlo."""
    closed_formable = (weight.action.is_quadratic
                       and (observable is None
                            or isinstance(observable, QuadraticObservable))
                       and (weight.initial_data is None
                            or weight.initial_data.family_tag == "plane_wave"))
    if closed_formable:
        return fresnel_pair_closed_form(weight, observable)
    return fresnel_pair_quadrature(weight, observable, engine)


def fresnel_pair_factorized(weight: FeynmanWeight,
                            observable: Optional[QuadraticObservable] = None,
                            nodes: Optional[int] = None) -> complex:
    """Quadrature route for quadratic exponents at any M: rotate to the
    eigenbasis of the action matrix, where the damped integral factorizes
    into one-dimensional oscillatory moments evaluated by dense
    Gauss-Legendre quadrature.

    Shares only the input preprocessing (eigendecomposition) with the closed
    form; all integration here is numerical.
    """
    if not weight.action.is_quadratic:
        raise EngineConfigError("factorized quadrature requires a quadratic action")
    a, b, c = _weight_quadratic_form(weight)
    m = a.shape[0]
    eps = weight.epsilon
    lam, rot = np.linalg.eigh(a)
    b_rot = rot.T @ b
    half_width = math.sqrt(2.0 * DAMPING_LOG_CUTOFF / eps)

    from scipy.special import roots_legendre

    def axis_moments(k: int) -> np.ndarray:
        cycles = (abs(lam[k]) * half_width ** 2 / 2.0
                  + abs(b_rot[k]) * half_width) / (2.0 * math.pi)
        n = nodes or int(min(30000, max(400, 12 * cycles + 200)))
        u, w = roots_legendre(n)
        x = half_width * u
        wx = half_width * w
        core = np.exp(1j * (0.5 * lam[k] * x ** 2 + b_rot[k] * x) - 0.5 * eps * x ** 2)
        return np.array([np.sum(wx * core),
                         np.sum(wx * x * core),
                         np.sum(wx * x ** 2 * core)])

    mom = np.array([axis_moments(k) for k in range(m)])   # (m, 3)
    base = np.prod(mom[:, 0]) * np.exp(1j * c)
    if observable is None:
        return complex(base)
    if observable.dim != m:
        raise DimensionMismatch("observable dimension != path dimension")
    zeroth = mom[:, 0]
    total = observable.const * np.prod(zeroth)

    def prod_except(ks):
        keep = np.ones(m, dtype=bool)
        keep[list(ks)] = False
        return np.prod(zeroth[keep]) if np.any(keep) else 1.0

    if observable.lin is not None:
        l_rot = rot.T @ observable.lin
        for k in range(m):
            total += l_rot[k] * mom[k, 1] * prod_except([k])
    if observable.quad is not None:
        q_rot = rot.T @ observable.quad @ rot
        for k in range(m):
            total += q_rot[k, k] * mom[k, 2] * prod_except([k])
            for j in range(k):
                total += 2.0 * q_rot[j, k] * mom[j, 1] * mom[k, 1] * prod_except([j, k])
    return complex(total * np.exp(1j * c))


# ---------------------------------------------------------------------------
# anomaly of a transformation family
# ---------------------------------------------------------------------------

def generator_field(family: TransformationFamily, delta):
    """The base-space generator h1 of a path-space family (trivial fiber)."""
    if family.m != 0:
        raise DimensionMismatch("path-space families carry a trivial fiber (m = 0)")
    vf = variation_fields(family, trivial_configuration(family.n), delta)
    return vf.h1


def anomaly_term(space: LatticePathSpace, family: TransformationFamily, delta,
                 path: np.ndarray):
    """tr h1'(path): the surviving logarithmic derivative of the flat
    path-space measure along the family generator.

    Implemented literally as the general field formula against a flat
    measure, so the score contribution is exactly zero.
    """
    if family.n != space.size:
        raise DimensionMismatch("family does not act on this path space")
    h1 = generator_field(family, delta)
    return log_derivative_along_field(flat_measure(space.size), h1, path)


@dataclass(frozen=True)
class FresnelDerivativeCheck:
    epsilon: float
    fd_step: float
    fd_value: complex
    action_pairing: complex
    initial_data_pairing: complex
    anomaly_pairing: complex
    damping_pairing: complex
    spec_decomposition: complex       # i * action_pairing + anomaly_pairing
    full_decomposition: complex       # + initial data - eps * damping terms
    residual_vs_full: float
    residual_vs_spec: float


@dataclass(frozen=True)
class RefinementTrend:
    sizes: tuple[int, ...]
    anomaly_totals: tuple[float, ...]
    ratios: tuple[float, ...]


@dataclass(frozen=True)
class AnomalyReport:
    certificate_max: float
    invariance_tol: float
    corollary_applies: bool
    anomaly_values: np.ndarray
    fd_check: Optional[FresnelDerivativeCheck]
    refinement: Optional[RefinementTrend]


def _invariance_certificate(action: Action, weight_f: Optional[TestFunction],
                            offset_q: np.ndarray, h1, probes: np.ndarray,
                            space: LatticePathSpace) -> float:
    grads = np.atleast_2d(action.exponent_gradient(probes))
    h1v = h1.value(np.atleast_2d(probes))
    vals = np.einsum("nm,nm->n", grads, h1v)
    if weight_f is not None:
        q, _ = space.split(probes)
        endpoint = q[:, -1, :] + offset_q
        fgrad = weight_f.gradient(endpoint)
        half = space.dof * space.steps
        h_q_end = h1v[:, half - space.dof:half]
        vals = vals + np.einsum("nd,nd->n", fgrad, h_q_end)
    return fd.max_abs(vals)


def anomaly_report(space: LatticePathSpace, family: TransformationFamily, delta,
                   hamiltonian: Hamiltonian, offset_q, initial_data,
                   probes: np.ndarray, engine: PairingEngine, *,
                   action: Optional[Action] = None,
                   invariance_tol: float = 1e-10,
                   epsilon: float = 0.25,
                   fd_step: float = 1e-3,
                   observable: Optional[TestFunction] = None,
                   check_fresnel: bool = False,
                   refine_steps: Optional[Sequence[int]] = None,
                   family_builder: Optional[Callable[[LatticePathSpace],
                                                     TransformationFamily]] = None,
                   probe_builder: Optional[Callable[[LatticePathSpace],
                                                    np.ndarray]] = None,
                   ) -> AnomalyReport:
    """Assemble the anomaly diagnosis for one transformation family.

    (a) invariance certificate: max |<grad exponent, h1> + d/dz f-term| over
        probe paths; the anomaly carries its meaning only when this passes;
    (b) the anomaly field tr h1' at the probes;
    (c) optional refinement sweep showing the linear-in-M growth of the
        anomaly total on replicated probes;
    (d) optional FD z-derivative of the damped pairing against the flowed
        observable, decomposed into action, initial-data, anomaly, and
        damping pairings.
    """
    if action is None:
        action = discretize_action(space, hamiltonian, offset_q)
    offset = getattr(action, "offset_q", np.zeros(space.dof))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    h1 = generator_field(family, delta)
    cert = _invariance_certificate(action, initial_data, offset, h1, probes, space)
    anomaly_values = np.asarray(anomaly_term(space, family, delta, probes))

    fd_check = None
    if check_fresnel:
        fd_check = _fresnel_derivative_check(space, action, initial_data, h1,
                                             observable, epsilon, fd_step, engine)

    trend = None
    if refine_steps:
        if family_builder is None or probe_builder is None:
            raise ValueError("refinement sweep needs family_builder and probe_builder")
        sizes, totals = [], []
        for steps in refine_steps:
            sub = LatticePathSpace(dof=space.dof, steps=steps, t_total=space.t_total)
            fam = family_builder(sub)
            probe = np.atleast_2d(probe_builder(sub))
            val = float(np.mean(np.asarray(anomaly_term(sub, fam, delta, probe))))
            sizes.append(sub.size)
            totals.append(val)
        ratios = tuple(totals[k + 1] / totals[k] for k in range(len(totals) - 1))
        trend = RefinementTrend(sizes=tuple(sizes), anomaly_totals=tuple(totals),
                                ratios=ratios)

    return AnomalyReport(certificate_max=cert, invariance_tol=invariance_tol,
                         corollary_applies=cert <= invariance_tol,
                         anomaly_values=anomaly_values, fd_check=fd_check,
                         refinement=trend)


def _fresnel_derivative_check(space, action, initial_data, h1, observable,
                              epsilon, fd_step, engine) -> FresnelDerivativeCheck:
    """FD derivative of z -> <damped weight, phi((id - z h1)(.))> against its
    pointwise decomposition."""
    m = space.size
    weight = FeynmanWeight(action=action, initial_data=initial_data, epsilon=epsilon)
    damped = damped_flat_measure(m, epsilon)
    phi = (lambda x: np.ones(np.atleast_2d(x).shape[0])) if observable is None \
        else observable.value

    def flowed_pairing(z):
        def integrand(x, _z=z):
            pts = np.atleast_2d(x)
            moved = pts - _z * h1.value(pts)
            return phi(moved) * weight.undamped(pts)
        return pair(damped, integrand, engine)

    fd_value = fd.central_difference(flowed_pairing, fd_step)

    grads = None

    def paired(factor):
        def integrand(x, _f=factor):
            pts = np.atleast_2d(x)
            return phi(pts) * _f(pts) * weight.undamped(pts)
        return pair(damped, integrand, engine)

    def action_factor(pts):
        return np.einsum("nm,nm->n", action.exponent_gradient(pts), h1.value(pts))

    def anomaly_factor(pts):
        return np.trace(np.asarray(h1.jacobian(pts)), axis1=-2, axis2=-1)

    def damping_factor(pts):
        return np.einsum("nm,nm->n", pts, h1.value(pts))

    def f_factor(pts):
        if initial_data is None:
            return np.zeros(pts.shape[0])
        q, _ = space.split(pts)
        endpoint = q[:, -1, :] + getattr(action, "offset_q", np.zeros(space.dof))
        fgrad = initial_data.gradient(endpoint)
        fval = initial_data.value(endpoint)
        half = space.dof * space.steps
        h_q_end = h1.value(pts)[:, half - space.dof:half]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(fval) > 0,
                             np.einsum("nd,nd->n", fgrad, h_q_end) / fval, 0.0)
        return ratio

    act = paired(action_factor)
    anom = paired(anomaly_factor)
    damp = paired(damping_factor)
    fterm = paired(f_factor)
    spec_dec = 1j * act + anom
    full_dec = 1j * act + fterm + anom - epsilon * damp
    return FresnelDerivativeCheck(
        epsilon=epsilon, fd_step=fd_step, fd_value=fd_value,
        action_pairing=act, initial_data_pairing=fterm, anomaly_pairing=anom,
        damping_pairing=damp, spec_decomposition=spec_dec,
        full_decomposition=full_dec,
        residual_vs_full=abs(fd_value - full_dec),
        residual_vs_spec=abs(fd_value - spec_dec))
