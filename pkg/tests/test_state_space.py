"""Disc geometry: charts, membership, projection."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qubit_feedback import (DomainError, PolarState, QubitState, from_polar,
                            membership_defect, project_to_disc, to_polar,
                            wrap_angle)

interior_r = st.floats(min_value=1e-6, max_value=0.5)
open_theta = st.floats(min_value=-math.pi + 1e-9, max_value=math.pi - 1e-9)


def test_wrap_angle_identifies_pi():
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == math.pi
    assert wrap_angle(0.1) == pytest.approx(0.1, abs=0)


def test_to_polar_north_pole():
    p = to_polar(QubitState(0.0, 1.0))
    assert p.r == pytest.approx(0.5, abs=1e-15)
    assert p.theta == pytest.approx(0.0, abs=1e-15)


def test_to_polar_quarter_turn():
    p = to_polar(QubitState(0.5, 0.5))
    assert p.r == pytest.approx(0.5, abs=1e-15)
    assert p.theta == pytest.approx(math.pi / 2, abs=1e-12)


def test_to_polar_rejects_origin_and_outsiders():
    with pytest.raises(DomainError):
        to_polar(QubitState(0.0, 0.0))
    with pytest.raises(DomainError):
        to_polar(QubitState(0.6, 0.5))


def test_from_polar_examples():
    s = from_polar(PolarState(0.5, 0.0))
    assert (s.lam, s.nu) == pytest.approx((0.0, 1.0), abs=1e-15)
    s = from_polar(PolarState(0.5, math.pi / 2))
    assert (s.lam, s.nu) == pytest.approx((0.5, 0.5), abs=1e-15)
    for r in (0.1, 0.3, 0.5):
        s = from_polar(PolarState(r, math.pi))
        assert abs(s.lam) <= 1e-15 and abs(s.nu) <= 1e-15


def test_polar_state_rejects_bad_radius():
    with pytest.raises(DomainError):
        PolarState(0.6, 0.0)
    with pytest.raises(DomainError):
        PolarState(-0.01, 0.0)


@given(interior_r, open_theta)
@settings(max_examples=300)
def test_polar_round_trip(r, theta):
    p2 = to_polar(from_polar(PolarState(r, theta)))
    assert p2.r == pytest.approx(r, abs=1e-12)
    assert p2.theta == pytest.approx(theta, abs=1e-12)


def test_from_polar_lands_in_disc_bulk():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        r = rng.uniform(0.0, 0.5)
        theta = rng.uniform(-math.pi, math.pi)
        s = from_polar(PolarState(r, theta))
        assert membership_defect(s) <= 1e-15


def test_membership_defect_examples():
    assert membership_defect(QubitState(0.0, 0.0)) == 0.0
    assert membership_defect(QubitState(0.6, 0.5)) == pytest.approx(0.11, abs=1e-15)


def test_projection_examples():
    inside = QubitState(0.0, 0.0)
    assert project_to_disc(inside) is inside
    s = project_to_disc(QubitState(0.0, 1.2))
    assert (s.lam, s.nu) == pytest.approx((0.0, 1.0), abs=1e-15)
    s = project_to_disc(QubitState(1.0, 0.5))
    assert (s.lam, s.nu) == pytest.approx((0.5, 0.5), abs=1e-15)


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
@settings(max_examples=300)
def test_projection_idempotent_and_valid(lam, nu):
    s = QubitState(lam, nu)
    p = project_to_disc(s)
    assert membership_defect(p) <= 1e-15
    p2 = project_to_disc(p)
    assert (p2.lam, p2.nu) == pytest.approx((p.lam, p.nu), abs=1e-15)
    # distance to the target changes by at most the projection displacement
    moved = math.hypot(p.lam - s.lam, p.nu - s.nu)
    assert abs(p.norm() - s.norm()) <= moved + 1e-15
