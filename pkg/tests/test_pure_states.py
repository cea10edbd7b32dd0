"""Boundary-dynamics analysis: operator algebra, spectrum, exit-time Monte Carlo."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qubit_feedback import (DomainError, ParameterError, PureParams,
                            ResonantRecursionError, SimConfig,
                            change_of_variable, eigen_recursion, h_function,
                            pure_drift_diffusion, pure_exit_details,
                            simulate_pure_exit, simulate_pure_path, spectrum,
                            weight_functions)
from qubit_feedback.pure_states import (eval_series_with_derivatives,
                                        exit_operator_apply,
                                        h_series_coefficients,
                                        series_eigenmode)
from qubit_feedback.simulator import fit_tail_rate

EX2 = PureParams(m=1.0, g1=1.0, g2=-0.5)


def principal_decay_rate(pp: PureParams, lo: float, hi: float, n: int = 1200) -> float:
    """Finite-difference oracle: slowest decay rate of the killed angle diffusion.

    Upwind advection plus central diffusion on (lo, hi) with absorption at
    both ends; returns the negated largest real eigenvalue of the
    discretized generator.  Independent route against the Monte Carlo
    survival-tail fits.
    """
    grid = np.linspace(lo, hi, n + 2)
    h = grid[1] - grid[0]
    x = grid[1:-1]
    sig2 = 0.5 * pp.m * np.sin(x) ** 2
    b = (0.5 * pp.g1 * np.sin(x) + 0.5 * pp.g2 * (1 + np.cos(x))
         - 0.5 * pp.m * np.sin(x) * np.cos(x))
    main = -2 * sig2 / h ** 2 - np.abs(b) / h
    up = sig2 / h ** 2 + np.where(b > 0, b, 0) / h
    dn = sig2 / h ** 2 + np.where(b < 0, -b, 0) / h
    gen = np.zeros((n, n))
    i = np.arange(n)
    gen[i, i] = main
    gen[i[:-1], i[:-1] + 1] = up[:-1]
    gen[i[1:], i[1:] - 1] = dn[1:]
    eigs = np.linalg.eigvals(gen)
    eigs = eigs[np.abs(eigs.imag) < 1e-8].real
    return float(-eigs.max())


def test_pure_params_validation():
    with pytest.raises(ParameterError):
        PureParams(m=1.0, g1=0.0, g2=-0.5)
    with pytest.raises(ParameterError):
        PureParams(m=1.0, g1=1.0, g2=0.0)
    with pytest.raises(ParameterError):
        PureParams(m=0.0, g1=1.0, g2=-0.5)


def test_drift_boundary_values():
    at_zero = pure_drift_diffusion(0.0, EX2)
    assert at_zero.drift[0] == EX2.g2
    assert at_zero.diffusion[0] == 0.0
    for th in (math.pi, -math.pi):
        dd = pure_drift_diffusion(th, EX2)
        assert abs(dd.drift[0]) <= 1e-15
        assert abs(dd.diffusion[0]) <= 1e-15


def test_drift_quarter_turn_example():
    dd = pure_drift_diffusion(math.pi / 2, EX2)
    assert dd.drift[0] == pytest.approx(0.25, abs=1e-15)
    assert dd.diffusion[0] == pytest.approx(-1.0, abs=1e-15)


def test_change_of_variable_examples():
    assert abs(change_of_variable(math.pi)) <= 1e-12
    assert change_of_variable(math.pi / 2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        change_of_variable(0.0)


@given(st.one_of(st.floats(min_value=0.1, max_value=math.pi),
                 st.floats(min_value=-math.pi, max_value=-0.1)))
@settings(max_examples=300)
def test_change_of_variable_identities(theta):
    x = change_of_variable(theta)
    assert abs(math.sin(theta) * (1 + x * x) - 2 * x) <= 1e-12
    assert abs(math.cos(theta) * (1 + x * x) - (x * x - 1)) <= 1e-12


def test_h_examples():
    assert h_function(0.0, EX2) == 0.0
    assert h_function(1.0, EX2) == pytest.approx(-0.5, abs=1e-15)


def test_h_series_coefficients_layout():
    h = h_series_coefficients(0.7, -1.3, 8)
    assert h[0] == 0.0
    assert h[1] == pytest.approx(1.7)
    assert h[2] == pytest.approx(-1.3)
    assert list(h[3:8]) == [-4.0, 0.0, 4.0, 0.0, -4.0]


@pytest.mark.parametrize("x,order", [(0.5, 40), (0.9, 100)])
def test_h_series_matches_closed_form(x, order):
    h = h_series_coefficients(EX2.g1 / EX2.m, EX2.g2 / EX2.m, order)
    series = float(np.polyval(h[::-1], x))
    # alternating tail: first omitted odd coefficient sits at 2J+1
    first_omitted = (order - 1) // 2 + 1
    remainder = 4.0 * x ** (2 * first_omitted + 1) / (1 + x * x)
    assert abs(series - h_function(x, EX2)) <= max(1.01 * remainder, 1e-10)


def test_weight_functions_example_and_positivity():
    p, r = weight_functions(1.0, EX2)
    assert p == pytest.approx(4.0 * math.exp(0.5), rel=1e-12)
    assert r == pytest.approx(p, rel=1e-12)
    rng = np.random.default_rng(31)
    for _ in range(100):
        x = rng.uniform(-3, 3)
        if abs(x) < 1e-3:
            continue
        pp = PureParams(m=rng.uniform(0.5, 2), g1=rng.uniform(0.1, 2),
                        g2=-rng.uniform(0.1, 2))
        pv, rv = weight_functions(x, pp)
        assert pv > 0 and rv > 0
    with pytest.raises(DomainError):
        weight_functions(0.0, EX2)


@pytest.mark.parametrize("y,yp,ypp", [
    (lambda x: x, lambda x: 1.0, lambda x: 0.0),
    (lambda x: x * x, lambda x: 2 * x, lambda x: 2.0),
    (lambda x: math.sin(x), lambda x: math.cos(x), lambda x: -math.sin(x)),
])
def test_weights_reproduce_the_exit_operator(y, yp, ypp):
    """Central-difference check of L y = -(p y')'/r on smooth test functions."""
    step = 1e-5
    for x in (-2.0, -1.3, -0.7, 0.4, 0.9, 1.6):
        p_hi, _ = weight_functions(x + step, EX2)
        p_lo, _ = weight_functions(x - step, EX2)
        _, r0 = weight_functions(x, EX2)
        flux_derivative = (p_hi * yp(x + step) - p_lo * yp(x - step)) / (2 * step)
        sturm = -flux_derivative / r0
        direct = exit_operator_apply(x, y(x), yp(x), ypp(x), EX2)
        assert sturm == pytest.approx(direct, rel=1e-7, abs=1e-8)


def test_eigenvalues_match_closed_form_over_random_gains():
    rng = np.random.default_rng(33)
    for _ in range(20):
        g1m = rng.uniform(0.05, 4.0)
        g2m = -rng.uniform(0.05, 3.0)
        for n in range(1, 6):
            lam, _ = series_eigenmode(g1m, g2m, n, order=n + 8)
            assert lam == pytest.approx((g1m + n) * n, rel=1e-12)


def test_matched_gain_sequence():
    sp = spectrum(PureParams(m=1.0, g1=1.0, g2=-0.5), 3)
    assert sp.eigenvalues == [2.0, 6.0, 12.0]
    assert [0.5 * 1.0 * lam for lam in sp.eigenvalues] == [1.0, 3.0, 6.0]


def test_recursion_coefficients_satisfy_matching_equations():
    rng = np.random.default_rng(35)
    for _ in range(50):
        g1m = rng.uniform(0.05, 4.0)
        g2m = -rng.uniform(0.05, 3.0)
        lam1, a = series_eigenmode(g1m, g2m, 1, order=6)
        # order-2 and order-3 coefficient equations of the series operator
        eq2 = 2 * (g1m + 2) * a[2] + g2m * a[1]
        eq3 = 3 * (g1m + 3) * a[3] + 2 * g2m * a[2] - 4.0 * a[1]
        assert eq2 == pytest.approx(lam1 * a[2], rel=1e-12, abs=1e-12)
        assert eq3 == pytest.approx(lam1 * a[3], rel=1e-12, abs=1e-12)


def test_mode_application_residual():
    """Applying the series operator pointwise reproduces lambda_n y_n."""
    xs = np.linspace(-0.5, 0.5, 21)
    for n in (1, 2, 3):
        mode = eigen_recursion(EX2, n, order=40)
        worst = 0.0
        scale = 0.0
        for x in xs:
            y, yp, ypp = eval_series_with_derivatives(mode.coefficients, float(x))
            left = x * x * ypp + h_function(float(x), EX2) * yp
            worst = max(worst, abs(left - mode.eigenvalue * y))
            scale = max(scale, abs(y))
        assert worst <= 1e-8 * max(1.0, scale)


def test_mode_normalization_and_monotonicity():
    sp = spectrum(EX2, 4, order=12)
    assert sp.truncation_order == 12
    assert all(b > a for a, b in zip(sp.eigenvalues, sp.eigenvalues[1:]))
    for n, coeffs in enumerate(sp.coefficient_tables, start=1):
        assert coeffs[n] == 1.0
        assert np.all(coeffs[:n] == 0.0)


def test_recursion_parameter_validation():
    with pytest.raises(ParameterError):
        series_eigenmode(1.0, -0.5, 0, 10)
    with pytest.raises(ParameterError):
        series_eigenmode(1.0, -0.5, 3, 4)


def test_resonant_recursion_is_flagged():
    with pytest.raises(ResonantRecursionError) as err:
        series_eigenmode(-3.0, -0.5, 1, 10)
    assert err.value.index == 2


def test_theta0_validation():
    cfg = SimConfig(dt=1e-3, t_max=0.1, seed=1)
    for bad in (math.pi, -math.pi, 4.0):
        with pytest.raises(DomainError):
            simulate_pure_path(bad, EX2, cfg)


def test_immediate_absorption_within_tolerance():
    cfg = SimConfig(dt=1e-3, t_max=0.05, seed=2, n_paths=16, record_stride=10)
    theta0 = math.pi - 5e-4
    traj = simulate_pure_path(theta0, EX2, cfg)
    assert traj.converged_at == 0.0
    assert np.all(traj.thetas == math.pi)
    summary = simulate_pure_exit(theta0, EX2, cfg)
    assert summary.fraction_converged == 1.0
    assert np.all(summary.unconverged_fraction == 0.0)
    assert summary.mean_nu[0] == pytest.approx(0.0, abs=1e-6)


def test_summary_starts_at_initial_state():
    cfg = SimConfig(dt=1e-3, t_max=0.05, seed=3, n_paths=8, record_stride=10)
    s = simulate_pure_exit(1.0, EX2, cfg)
    assert s.mean_nu[0] == pytest.approx(0.5 * (1 + math.cos(1.0)), abs=1e-12)


def test_pure_exit_deterministic_across_workers():
    cfg = SimConfig(dt=1e-3, t_max=1.0, seed=5, n_paths=600, record_stride=20)
    a = simulate_pure_exit(2.0, EX2, cfg, workers=1)
    b = simulate_pure_exit(2.0, EX2, cfg, workers=3)
    assert np.array_equal(a.mean_nu, b.mean_nu)
    assert np.array_equal(a.unconverged_fraction, b.unconverged_fraction)


def test_entrance_boundary_blocks_lower_arc_paths():
    """Paths started just below theta = 0 never penetrate the upper arc."""
    cfg = SimConfig(dt=1e-3, t_max=3.0, seed=21, n_paths=500)
    details = pure_exit_details(-0.05, EX2, cfg)
    assert float(details.max_theta.max()) < 0.05
    assert set(np.unique(details.first_exit_side)) <= {0, 1}


def test_upper_arc_paths_leave_through_both_boundaries():
    cfg = SimConfig(dt=1e-3, t_max=12.0, seed=3, n_paths=4000)
    details = pure_exit_details(2.5, EX2, cfg)
    n_target = int((details.first_exit_side == 1).sum())
    n_neck = int((details.first_exit_side == -1).sum())
    assert n_target > 0 and n_neck > 0
    assert n_target + n_neck == 4000


def test_upper_arc_exit_rate_matches_leading_mode():
    """First-exit survival of the upper arc decays at the (g1+M)/2 rate.

    Dual route: the Monte Carlo tail fit agrees with both the closed-form
    leading rate and an independent finite-difference eigenvalue of the
    killed generator on (0, pi).
    """
    cfg = SimConfig(dt=1e-3, t_max=12.0, seed=3, n_paths=4000)
    details = pure_exit_details(2.5, EX2, cfg)
    times = np.arange(0, cfg.n_steps + 1, 10) * cfg.dt
    u = (details.first_exit_time[None, :] > times[:, None]).mean(axis=1)
    mc = fit_tail_rate(times, u, 5.0)
    closed_form = 0.5 * (EX2.g1 + EX2.m)
    fd = principal_decay_rate(EX2, 0.0, math.pi - 1e-3)
    assert abs(fd - closed_form) <= 0.02 * closed_form
    assert abs(mc - closed_form) <= 0.15 * closed_form


def test_target_absorption_rate_matches_fd_eigenvalue():
    """Survival tail of target absorption agrees with the FD principal eigenvalue."""
    cfg = SimConfig(dt=1e-3, t_max=20.0, seed=7, n_paths=5000, record_stride=10)
    summary = simulate_pure_exit(0.1, EX2, cfg)
    fd = principal_decay_rate(EX2, -math.pi + 1e-3, math.pi - 1e-3)
    assert summary.fitted_rate is not None
    assert abs(summary.fitted_rate - fd) <= 0.2 * fd
