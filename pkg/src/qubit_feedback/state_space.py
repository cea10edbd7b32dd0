"""Geometry of the qubit conditional-state disc.

A real-valued qubit density matrix is parametrized by two numbers: the
population nu = rho_11 (so rho_22 = 1 - nu) and the real off-diagonal
entry lambda = rho_21 = rho_12.  Positivity of the density matrix is the
disc constraint

    lambda^2 + nu*(nu - 1) <= 0,

a closed disc of radius 1/2 centered at (0, 1/2).  The origin (0, 0) is
the control target diag(0, 1); the opposite pole (0, 1) is diag(1, 0).
Boundary points are the pure states.  Imaginary parts of the off-diagonal
entry decouple from the monitored dynamics and are dropped, so the state
space is exactly two-real-dimensional.

Two charts are used:

* the polar chart (r, theta) with (lambda, nu) = r*(sin theta, 1 + cos theta),
  r in [0, 1/2]; theta = +-pi collapses to the origin of the disc, and
* the pure-state chart, the boundary circle parametrized by theta alone via
  (lambda, nu) = (sin theta, 1 + cos theta)/2, where theta = +-pi again is
  the target state.

Both charts therefore agree that theta = +-pi names the target; the two
values are identified (angles are canonically wrapped to (-pi, pi]).

All functions here are pure; values are safe to share between tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

#: absolute tolerance for membership checks against the disc inequality
MEMBERSHIP_ATOL = 1e-12


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the canonical interval (-pi, pi], identifying -pi with pi."""
    th = math.remainder(theta, 2.0 * math.pi)
    if th == -math.pi:
        th = math.pi
    return th


@dataclass(frozen=True)
class QubitState:
    """Point (lambda, nu) of the conditional-state disc.

    Construction is unchecked so that intermediate (possibly off-disc)
    integrator states can be represented; ``membership_defect`` quantifies
    any violation and ``project_to_disc`` repairs it.
    """

    lam: float
    nu: float

    def norm(self) -> float:
        """Euclidean distance to the target state (0, 0)."""
        return math.hypot(self.lam, self.nu)


@dataclass(frozen=True)
class PolarState:
    """Polar-chart point: r in [0, 1/2], theta wrapped to (-pi, pi]."""

    r: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.r <= 0.5:
            raise DomainError(f"radial coordinate {self.r} outside [0, 1/2]")
        object.__setattr__(self, "theta", wrap_angle(self.theta))


# The pure-state chart carries a single angle; a plain float keeps call
# sites uncluttered.  Producers wrap with wrap_angle.
PureAngle = float


def disc_defect(lam, nu):
    """Signed disc constraint lambda^2 + nu*(nu-1); positive means outside.

    Accepts scalars or numpy arrays.
    """
    return lam * lam + nu * (nu - 1.0)


def membership_defect(s: QubitState) -> float:
    """Clamped violation max(0, lambda^2 + nu*(nu-1)); zero iff s is in the disc."""
    return max(0.0, disc_defect(s.lam, s.nu))


def project_arrays(lam, nu):
    """Radially project (lam, nu) arrays onto the disc (toward center (0, 1/2)).

    Points already inside are returned unchanged (up to float identity of
    the no-op scaling).  Vectorized; used by the integrator after every step.
    """
    un = nu - 0.5
    rad2 = lam * lam + un * un
    outside = rad2 > 0.25
    norm = np.sqrt(np.where(outside, rad2, 1.0))
    scale = np.where(outside, 0.5 / norm, 1.0)
    return lam * scale, 0.5 + un * scale


def project_to_disc(s: QubitState) -> QubitState:
    """Closest-point projection onto the disc; identity for members.

    The projection is radial toward the disc center (0, 1/2), which is the
    Euclidean closest-point map for a disc and preserves the angular
    coordinate of the polar chart.
    """
    if disc_defect(s.lam, s.nu) <= 0.0:
        return s
    un = s.nu - 0.5
    norm = math.hypot(s.lam, un)
    scale = 0.5 / norm
    return QubitState(s.lam * scale, 0.5 + un * scale)


def to_polar(s: QubitState) -> PolarState:
    """Polar-chart coordinates of a disc point: r = (lam^2+nu^2)/(2 nu), theta = 2 atan2(lam, nu).

    The chart is undefined at the origin (the target state), where every
    theta describes the same point.
    """
    if disc_defect(s.lam, s.nu) > MEMBERSHIP_ATOL:
        raise DomainError(f"state ({s.lam}, {s.nu}) is not in the disc")
    if s.nu <= 0.0:
        # membership forces lam = 0 when nu = 0, i.e. the origin
        raise DomainError("polar chart undefined at origin")
    r = (s.lam * s.lam + s.nu * s.nu) / (2.0 * s.nu)
    return PolarState(min(r, 0.5), 2.0 * math.atan2(s.lam, s.nu))


def from_polar(p: PolarState) -> QubitState:
    """Disc point of polar coordinates: (lambda, nu) = r*(sin theta, 1 + cos theta).

    Evaluated through half-angle products, lambda = 2r sin(t/2) cos(t/2)
    and nu = 2r cos(t/2)^2, which stay fully accurate where 1 + cos theta
    suffers cancellation (theta near +-pi).
    """
    half = 0.5 * p.theta
    s, c = math.sin(half), math.cos(half)
    return QubitState(2.0 * p.r * s * c, 2.0 * p.r * c * c)
