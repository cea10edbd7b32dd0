"""Reduced conditional-state dynamics of the monitored qubit.

The conditional density operator of a qubit under continuous homodyne
monitoring of the population observable, with a feedback field applied
along J_y, obeys an operator-valued diffusive master equation driven by a
single scalar innovations increment dW.  For real-valued states that
equation closes on the disc coordinates (lambda, nu) and reads

    d lambda = [B*(nu - 1/2) - (M/2)*lambda] dt + sqrt(M eta) lambda (1 - 2 nu) dW
    d nu     = -B*lambda dt                 - 2 sqrt(M eta) nu (nu - 1) dW

with measurement rate M > 0 (Hz), detection efficiency eta in (0, 1], and
feedback field B.  The linear state-feedback controller is

    B(lambda, nu) = g1*lambda + g2*nu        (Hz).

Both noise terms share one Wiener increment, so the second-order
(generator) coefficients are 2*M*eta*lambda^2*(nu-1/2)^2 for lambda,
2*M*eta*nu^2*(nu-1)^2 for nu, and a cross coefficient
4*M*eta*lambda*(nu-1/2)*nu*(nu-1).  ``generator_apply`` implements the
diagonal form used by the stability certificate; ``generator_apply_full``
additionally carries the cross term so the two can be compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .state_space import QubitState


@dataclass(frozen=True)
class ExperimentParams:
    """Measurement rate m (Hz), detection efficiency eta, feedback gains g1, g2 (Hz)."""

    m: float
    eta: float
    g1: float
    g2: float

    def __post_init__(self):
        if not self.m > 0.0:
            raise ParameterError(f"measurement rate must be positive, got {self.m}")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"detection efficiency must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class DriftDiffusion:
    """Drift vector (per s) and diffusion vector (per sqrt(s)) at one state."""

    drift: tuple[float, float]
    diffusion: tuple[float, float]


def controller(s: QubitState, p: ExperimentParams) -> float:
    """Feedback field B = g1*lambda + g2*nu (Hz); zero at the target."""
    return p.g1 * s.lam + p.g2 * s.nu


def sde_terms(lam, nu, m, eta, g1, g2):
    """Drift and diffusion coefficient arrays of the 2-D state SDE.

    Vectorized over numpy arrays (or scalars); this is the single source
    of the coefficient formulas for both the pointwise API and the
    integrator.
    """
    B = g1 * lam + g2 * nu
    drift_l = B * (nu - 0.5) - 0.5 * m * lam
    drift_n = -B * lam
    amp = np.sqrt(m * eta)
    diff_l = amp * lam * (1.0 - 2.0 * nu)
    diff_n = -2.0 * amp * nu * (nu - 1.0)
    return drift_l, drift_n, diff_l, diff_n


def drift_diffusion(s: QubitState, p: ExperimentParams) -> DriftDiffusion:
    """Drift and diffusion of the state SDE at s, under controller B(s)."""
    dl, dn, sl, sn = sde_terms(s.lam, s.nu, p.m, p.eta, p.g1, p.g2)
    return DriftDiffusion((float(dl), float(dn)), (float(sl), float(sn)))


def generator_apply(s: QubitState, p: ExperimentParams,
                    grad: tuple[float, float],
                    hess_diag: tuple[float, float]) -> float:
    """Diagonal-form generator applied to a test function at s.

    The caller supplies the first derivatives (d/d lambda, d/d nu) and the
    pure second derivatives of the test function at s.  The mixed second
    derivative is deliberately absent here; see ``generator_apply_full``.
    """
    b = controller(s, p)
    lam, nu = s.lam, s.nu
    first = (b * (nu - 0.5) - 0.5 * p.m * lam) * grad[0] - b * lam * grad[1]
    second = 2.0 * p.m * p.eta * (
        lam * lam * (nu - 0.5) ** 2 * hess_diag[0]
        + nu * nu * (nu - 1.0) ** 2 * hess_diag[1]
    )
    return first + second


def generator_cross_coefficient(s: QubitState, p: ExperimentParams) -> float:
    """Coefficient of the mixed second derivative in the full Ito generator.

    Equals the product of the two diffusion coefficients,
    4*M*eta*lambda*(nu - 1/2)*nu*(nu - 1); it vanishes on the coordinate
    axes and at both poles.
    """
    lam, nu = s.lam, s.nu
    return 4.0 * p.m * p.eta * lam * (nu - 0.5) * nu * (nu - 1.0)


def generator_apply_full(s: QubitState, p: ExperimentParams,
                         grad: tuple[float, float],
                         hess_diag: tuple[float, float],
                         hess_mixed: float) -> float:
    """Full Ito generator including the single-noise cross term.

    Because one Wiener increment drives both coordinates, the quadratic
    variation has a cross component; this entry point adds
    cross_coefficient * hess_mixed to the diagonal form.
    """
    return generator_apply(s, p, grad, hess_diag) + \
        generator_cross_coefficient(s, p) * hess_mixed


def pure_sde_terms(theta, m, g1, g2):
    """Drift and diffusion of the boundary (pure-state) angle SDE; vectorized.

    On the boundary circle the controller restricts to
    B = (g1/2) sin theta + (g2/2)(1 + cos theta) and the angle obeys

        d theta = (B - (M/2) sin theta cos theta) dt - sqrt(M) sin theta dW.
    """
    s = np.sin(theta)
    c = np.cos(theta)
    drift = 0.5 * g1 * s + 0.5 * g2 * (1.0 + c) - 0.5 * m * s * c
    diffusion = -np.sqrt(m) * s
    return drift, diffusion
