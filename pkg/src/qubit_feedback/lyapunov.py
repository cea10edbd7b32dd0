"""Lyapunov stability certificate for the controlled qubit.

For constants c > 1 and 0 < d < 2(c - 1) the quadratic-plus-linear form

    V(lambda, nu) = c*nu + d*lambda*nu - lambda^2 - nu^2

is positive on the disc away from the target and vanishes there.  Applying
the diagonal-form generator of the monitored dynamics gives the closed
form ``lv_closed_form``; in the polar chart the generator value factors as

    LV(r, theta) = f(r, theta) * r^2 * (1 + cos theta),

so negativity of the bounded auxiliary function f on
[0, 1/2] x [-pi, pi] certifies strict decrease of V in expectation, and
with it stochastic stability of the target.  ``certify`` decides
f_max < 0 numerically on a grid with adaptive refinement plus a safety
margin, together with the necessary sign conditions on the gains that
follow from the two boundary slices:

    f(r, +-pi) = 2*((1 - eta)*M - (c - 1)*g1)            (r-independent)
    f(r, 0)    = -32*M*eta*(r^2 - (1 + d*g2/(8*M*eta))*r
                            + (8*M*eta + d*g2)/(32*M*eta))

which require g1 > (1-eta)*M/(c-1) and -8*M*eta/d < g2 < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ExperimentParams, controller
from .errors import ParameterError
from .state_space import PolarState, QubitState


@dataclass(frozen=True)
class CertificateParams:
    """Lyapunov constants and grid-search controls for the certificate.

    The base grid has grid_r x grid_theta points on [0, 1/2] x [-pi, pi];
    each refinement level re-samples the 8 neighbours of the top 1% of
    points at half the previous spacing.  ``safety_margin`` is subtracted
    from zero when deciding negativity: certification requires the refined
    maximum to lie below -safety_margin.
    """

    c: float = 4.0
    d: float = 2.0
    grid_r: int = 201
    grid_theta: int = 629
    refine_depth: int = 3
    safety_margin: float = 1e-6

    def __post_init__(self):
        if not self.c > 1.0:
            raise ParameterError(f"constant c must satisfy c > 1, got {self.c}")
        if not 0.0 < self.d < 2.0 * (self.c - 1.0):
            raise ParameterError(
                f"constant d must satisfy 0 < d < 2(c-1) = {2.0 * (self.c - 1.0)}, got {self.d}"
            )
        if self.grid_r < 2 or self.grid_theta < 2:
            raise ParameterError("grid resolutions must be at least 2")
        if self.refine_depth < 0:
            raise ParameterError("refine_depth must be nonnegative")
        if not self.safety_margin > 0.0:
            raise ParameterError("safety_margin must be positive")


@dataclass(frozen=True)
class CertificateResult:
    """Outcome of the grid certificate."""

    certified: bool
    f_max_estimate: float
    argmax: PolarState
    necessary_conditions_hold: bool
    grid_evaluations: int


def lyapunov_v(s: QubitState, cp: CertificateParams) -> float:
    """Candidate Lyapunov value V = c*nu + d*lambda*nu - lambda^2 - nu^2."""
    return cp.c * s.nu + cp.d * s.lam * s.nu - s.lam ** 2 - s.nu ** 2


def lyapunov_derivatives(s: QubitState, cp: CertificateParams):
    """Gradient, diagonal Hessian and mixed second derivative of V at s."""
    grad = (cp.d * s.nu - 2.0 * s.lam, cp.c + cp.d * s.lam - 2.0 * s.nu)
    hess_diag = (-2.0, -2.0)
    hess_mixed = cp.d
    return grad, hess_diag, hess_mixed


def lv_closed_form(s: QubitState, ep: ExperimentParams, cp: CertificateParams) -> float:
    """Closed form of the diagonal generator applied to V.

    Groups the terms by monomial:

        [M - d*B - (c-1)*g1]*lambda^2 + d*g2*nu^2*(nu - 1/2)
        + [d*g1*(nu - 1/2) - (c-1)*g2 - d*M/2]*lambda*nu
        - 4*M*eta*[lambda^2*(nu - 1/2)^2 + nu^2*(nu - 1)^2].
    """
    lam, nu = s.lam, s.nu
    m, eta, g1, g2, c, d = ep.m, ep.eta, ep.g1, ep.g2, cp.c, cp.d
    b = controller(s, ep)
    return (
        (m - d * b - (c - 1.0) * g1) * lam * lam
        + d * g2 * nu * nu * (nu - 0.5)
        + (d * g1 * (nu - 0.5) - (c - 1.0) * g2 - 0.5 * d * m) * lam * nu
        - 4.0 * m * eta * (lam * lam * (nu - 0.5) ** 2 + nu * nu * (nu - 1.0) ** 2)
    )


def f_values(r, theta, ep: ExperimentParams, cp: CertificateParams):
    """Auxiliary function f on arrays of polar points (vectorized).

    f is the quotient LV / (r^2 (1 + cos theta)) extended continuously to
    the whole box; each summand below is the exact polar image of one
    monomial group of ``lv_closed_form``.
    """
    m, eta, g1, g2, c, d = ep.m, ep.eta, ep.g1, ep.g2, cp.c, cp.d
    sin = np.sin(theta)
    cos = np.cos(theta)
    one_m = 1.0 - cos
    one_p = 1.0 + cos
    return (
        (m - (c - 1.0) * g1) * one_m
        - d * g1 * r * sin * one_m
        + (d * g1 * one_p * r - (c - 1.0) * g2 - 0.5 * d * (g1 + m)) * sin
        + d * g2 * one_p * (2.0 * r * cos - 0.5)
        - 4.0 * m * eta * one_m * (one_p * r - 0.5) ** 2
        - 4.0 * m * eta * one_p * (one_p * r - 1.0) ** 2
    )


def f_aux(p: PolarState, ep: ExperimentParams, cp: CertificateParams) -> float:
    """Auxiliary function f(r, theta); negative everywhere iff V certifies stability."""
    return float(f_values(p.r, p.theta, ep, cp))


def f_boundary_value(ep: ExperimentParams, cp: CertificateParams) -> float:
    """The r-independent value f(r, +-pi) = 2((1-eta)M - (c-1) g1)."""
    return 2.0 * ((1.0 - ep.eta) * ep.m - (cp.c - 1.0) * ep.g1)


def f_axis_quadratic(r: float, ep: ExperimentParams, cp: CertificateParams) -> float:
    """The theta = 0 slice as an explicit downward parabola in r."""
    m, eta, g2, d = ep.m, ep.eta, ep.g2, cp.d
    me = m * eta
    return -32.0 * me * (
        r * r - (1.0 + d * g2 / (8.0 * me)) * r + (8.0 * me + d * g2) / (32.0 * me)
    )


def necessary_gain_conditions(ep: ExperimentParams, cp: CertificateParams) -> bool:
    """Sign conditions on the gains implied by f < 0 at theta = +-pi and theta = 0.

    f(r, pi) < 0 forces g1 > (1-eta)M/(c-1); the endpoints of the theta = 0
    parabola force -8*M*eta/d < g2 < 0.
    """
    g1_ok = ep.g1 > (1.0 - ep.eta) * ep.m / (cp.c - 1.0)
    g2_ok = -8.0 * ep.m * ep.eta / cp.d < ep.g2 < 0.0
    return g1_ok and g2_ok


def certify(ep: ExperimentParams, cp: CertificateParams) -> CertificateResult:
    """Grid decision of f_max < 0 with adaptive refinement.

    Evaluates f on the full grid, then ``refine_depth`` times re-samples
    around the current top 1% of points at half the previous spacing.
    The evaluation is embarrassingly parallel over points and the final
    max-reduction is order independent, so the result is deterministic.
    Certification additionally requires the necessary gain conditions.
    """
    base_r = np.linspace(0.0, 0.5, cp.grid_r)
    base_t = np.linspace(-math.pi, math.pi, cp.grid_theta)
    rr, tt = np.meshgrid(base_r, base_t, indexing="ij")
    pts_r = rr.ravel()
    pts_t = tt.ravel()
    vals = f_values(pts_r, pts_t, ep, cp)
    evaluations = pts_r.size

    dr = 0.5 / (cp.grid_r - 1)
    dt = 2.0 * math.pi / (cp.grid_theta - 1)
    offsets = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)],
                       dtype=float)
    for _ in range(cp.refine_depth):
        dr *= 0.5
        dt *= 0.5
        top = max(1, round(0.01 * pts_r.size))
        order = np.argsort(-vals, kind="stable")[:top]
        new_r = np.clip(pts_r[order][:, None] + dr * offsets[:, 0], 0.0, 0.5).ravel()
        new_t = np.clip(pts_t[order][:, None] + dt * offsets[:, 1], -math.pi, math.pi).ravel()
        new_vals = f_values(new_r, new_t, ep, cp)
        evaluations += new_r.size
        pts_r = np.concatenate([pts_r, new_r])
        pts_t = np.concatenate([pts_t, new_t])
        vals = np.concatenate([vals, new_vals])

    k = int(np.argmax(vals))
    f_max = float(vals[k])
    necessary = necessary_gain_conditions(ep, cp)
    return CertificateResult(
        certified=bool(necessary and f_max < -cp.safety_margin),
        f_max_estimate=f_max,
        argmax=PolarState(float(pts_r[k]), float(pts_t[k])),
        necessary_conditions_hold=necessary,
        grid_evaluations=int(evaluations),
    )
