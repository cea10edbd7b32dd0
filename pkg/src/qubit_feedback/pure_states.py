"""Pure-state (boundary) analysis: exit-time Monte Carlo and the rate spectrum.

With perfect detection the boundary circle is invariant and the dynamics
reduce to a single angle theta with target theta = +-pi,

    d theta = b(theta) dt - sqrt(M) sin(theta) dW,
    b(theta) = (g1/2) sin theta + (g2/2)(1 + cos theta) - (M/2) sin theta cos theta.

The drift vanishes at the target and equals g2 < 0 at theta = 0, so the
noise-free point theta = 0 splits the circle: it is an exit boundary for
the upper arc J+ = (0, pi) (paths may leave J+ through it) but an
entrance boundary for the lower arc J- = (-pi, 0) (paths cannot cross
into J+).

In the variable x = cot(theta/2) the expected-exit-time equation takes
the form  dT/dt - (M/2) L T = -1  with

    L y = -x^2 y'' + h(x) y',
    h(x) = (g1/M) x + (g2/M) x^2 + (x - 3 x^3)/(1 + x^2),

and L is formally self-adjoint: L y = -(p y')'/r with the weights
returned by ``weight_functions``.

The convergence-rate family comes from power-series modes y_n = x^n + ...
at x = 0 of the companion series operator  S y = +x^2 y'' + h(x) y'
(matching coefficients order by order), whose spectrum

    lambda_n = (g1/M + n) n

is strictly increasing for g1 > 0.  The x^2 term contributes nothing at
first order, so the leading mode n = 1 with lambda_1 = g1/M + 1 is shared
by L and S; its physical rate (M/2) lambda_1 = (g1 + M)/2 is the local
contraction rate of the angle at the target and governs the first-exit
tail of the J+ problem.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import DriftDiffusion, pure_sde_terms
from .errors import (DomainError, IntegrationError, ParameterError,
                     ResonantRecursionError)
from .lyapunov import CertificateParams
from .simulator import CHUNK, NOISE_BLOCK, EnsembleSummary, SimConfig, \
    fit_tail_rate, path_generator
from .state_space import PureAngle

#: default absorption window around the target angles +-pi (radians)
DEFAULT_ANGLE_TOL = 1e-3


@dataclass(frozen=True)
class PureParams:
    """Measurement rate and gains for the boundary dynamics (g1 > 0, g2 < 0)."""

    m: float
    g1: float
    g2: float

    def __post_init__(self):
        if not self.m > 0.0:
            raise ParameterError(f"measurement rate must be positive, got {self.m}")
        if not self.g1 > 0.0:
            raise ParameterError(f"gain g1 must be positive, got {self.g1}")
        if not self.g2 < 0.0:
            raise ParameterError(f"gain g2 must be negative, got {self.g2}")


@dataclass(frozen=True)
class EigenMode:
    """One power-series mode: eigenvalue, physical rate and series coefficients."""

    n: int
    eigenvalue: float
    rate_hz: float
    coefficients: np.ndarray


@dataclass(frozen=True)
class SpectrumResult:
    """Modes n = 1..n_max of the series operator, all at one truncation order."""

    eigenvalues: list[float]
    coefficient_tables: list[np.ndarray]
    truncation_order: int


@dataclass(frozen=True)
class PureTrajectory:
    """Recorded angle path; converged_at is the target-absorption time (None if never)."""

    times: np.ndarray
    thetas: np.ndarray
    converged_at: float | None


@dataclass(frozen=True)
class PureExitDetails:
    """Per-path bookkeeping of a pure-state ensemble.

    converged_at: target-absorption time, inf when not absorbed by t_max.
    first_exit_time/side: first exit from the starting arc; side +1 means
    the target was reached, -1 means the path left J+ through theta <= 0
    (only possible for starts in J+), 0 means no exit by t_max.
    max_theta: largest angle reached, used to quantify (non-)crossings of
    the entrance boundary for starts in J-.
    """

    converged_at: np.ndarray
    first_exit_time: np.ndarray
    first_exit_side: np.ndarray
    max_theta: np.ndarray


def pure_drift_diffusion(theta: PureAngle, pp: PureParams) -> DriftDiffusion:
    """Drift and diffusion of the angle SDE (second vector slots unused)."""
    b, s = pure_sde_terms(theta, pp.m, pp.g1, pp.g2)
    return DriftDiffusion((float(b), 0.0), (float(s), 0.0))


def change_of_variable(theta: PureAngle) -> float:
    """Half-angle cotangent x = cot(theta/2); poles at theta = 0 mod 2 pi."""
    if math.remainder(theta, 2.0 * math.pi) == 0.0:
        raise DomainError("cot(theta/2) diverges at theta = 0")
    return 1.0 / math.tan(0.5 * theta)


def h_function(x: float, pp: PureParams) -> float:
    """First-order coefficient h(x) of the exit-time operator (closed form)."""
    g1m = pp.g1 / pp.m
    g2m = pp.g2 / pp.m
    return g1m * x + g2m * x * x + (x - 3.0 * x ** 3) / (1.0 + x * x)


def h_series_coefficients(g1_over_m: float, g2_over_m: float, order: int) -> np.ndarray:
    """Power-series coefficients of h on |x| < 1.

    Expanding (x - 3x^3)/(1+x^2) = x - 4x^3 + 4x^5 - 4x^7 + ... gives
    h_1 = g1/M + 1, h_2 = g2/M and h_{2j+1} = 4(-1)^j for j >= 1.
    """
    h = np.zeros(order + 1)
    if order >= 1:
        h[1] = g1_over_m + 1.0
    if order >= 2:
        h[2] = g2_over_m
    for j in range(1, order // 2 + 1):
        k = 2 * j + 1
        if k <= order:
            h[k] = 4.0 * (-1.0) ** j
    return h


def weight_functions(x: float, pp: PureParams) -> tuple[float, float]:
    """Sturm-Liouville weights (p, r) with L y = -(p y')'/r.

    p solves p'/p = -h/x^2, i.e. p = exp(-int h/x^2 dx); integrating the
    partial fractions h(x)/x^2 = (g1/M + 1)/x + g2/M - 4x/(1+x^2) gives

        p(x) = (1 + x^2)^2 * |x|^(-(g1/M + 1)) * exp(-(g2/M) x),
        r(x) = p(x)/x^2,

    both positive away from the singular point x = 0.
    """
    if x == 0.0:
        raise DomainError("weights are singular at x = 0")
    g1m = pp.g1 / pp.m
    g2m = pp.g2 / pp.m
    p = (1.0 + x * x) ** 2 * abs(x) ** (-(g1m + 1.0)) * math.exp(-g2m * x)
    return p, p / (x * x)


def exit_operator_apply(x: float, y: float, yp: float, ypp: float,
                        pp: PureParams) -> float:
    """Pointwise action L y = -x^2 y'' + h(x) y' of the exit-time operator."""
    return -x * x * ypp + h_function(x, pp) * yp


def eval_series_with_derivatives(coeffs: np.ndarray, x: float):
    """Evaluate a power series and its first two derivatives at x."""
    ks = np.arange(len(coeffs), dtype=float)
    powers = np.concatenate([[1.0], np.cumprod(np.full(len(coeffs) - 1, x))])
    y = float((coeffs * powers).sum())
    yp = float((ks[1:] * coeffs[1:] * powers[:-1]).sum())
    ypp = float((ks[2:] * (ks[2:] - 1.0) * coeffs[2:] * powers[:-2]).sum())
    return y, yp, ypp


def series_eigenmode(g1_over_m: float, g2_over_m: float, n: int,
                     order: int) -> tuple[float, np.ndarray]:
    """Coefficient-matching solution of S y_n = lambda_n y_n, normalized a_n = 1.

    The series operator S y = x^2 y'' + h y' maps x^m to
    lambda_m x^m + (lower-coefficient convolution terms), with
    lambda_m = (g1/M + m) m, so matching coefficients yields the
    triangular recursion

        a_m = -sum_{k<m} k a_k h_{m-k+1} / (lambda_m - lambda_n),  m > n.

    A vanishing divisor (possible only for g1 <= 0) raises
    ResonantRecursionError with the offending order.
    """
    if n < 1:
        raise ParameterError("mode index n must be a positive integer")
    if order < n + 2:
        raise ParameterError("truncation order must be at least n + 2")
    h = h_series_coefficients(g1_over_m, g2_over_m, order + 1)

    def lam(mm: int) -> float:
        return (g1_over_m + mm) * mm

    a = np.zeros(order + 1)
    a[n] = 1.0
    lam_n = lam(n)
    for m in range(n + 1, order + 1):
        conv = 0.0
        for k in range(n, m):
            conv += k * a[k] * h[m - k + 1]
        denom = lam(m) - lam_n
        if abs(denom) < 1e-9 * max(1.0, abs(lam_n)):
            raise ResonantRecursionError(index=m)
        a[m] = -conv / denom
    return lam_n, a


def eigen_recursion(pp: PureParams, n: int, order: int) -> EigenMode:
    """Mode n of the series operator for physical parameters pp."""
    lam_n, coeffs = series_eigenmode(pp.g1 / pp.m, pp.g2 / pp.m, n, order)
    return EigenMode(n=n, eigenvalue=lam_n, rate_hz=0.5 * pp.m * lam_n,
                     coefficients=coeffs)


def spectrum(pp: PureParams, n_max: int, order: int | None = None) -> SpectrumResult:
    """Modes 1..n_max at a common truncation order (default n_max + 10)."""
    if n_max < 1:
        raise ParameterError("n_max must be a positive integer")
    if order is None:
        order = n_max + 10
    modes = [eigen_recursion(pp, n, order) for n in range(1, n_max + 1)]
    return SpectrumResult(
        eigenvalues=[mode.eigenvalue for mode in modes],
        coefficient_tables=[mode.coefficients for mode in modes],
        truncation_order=order,
    )


@dataclass
class _PureChunk:
    sum_v: np.ndarray | None
    sum_v2: np.ndarray | None
    sum_nu: np.ndarray | None
    sum_nu2: np.ndarray | None
    converged_at: np.ndarray
    first_exit_time: np.ndarray
    first_exit_side: np.ndarray
    max_theta: np.ndarray
    rec_theta: np.ndarray | None = None


def _integrate_pure_chunk(theta0: float, pp: PureParams, cfg: SimConfig,
                          indices: range, angle_tol: float,
                          cp: CertificateParams, collect: bool) -> _PureChunk:
    """Advance one chunk of angle paths; freeze each path at +-pi once absorbed."""
    n = len(indices)
    n_steps = cfg.n_steps
    dt = cfg.dt
    sdt = math.sqrt(dt)
    rec_indices = range(0, n_steps + 1, cfg.record_stride)
    n_rec = len(rec_indices)
    from_jplus = theta0 > 0.0

    th = np.full(n, float(theta0))
    rngs = [path_generator(cfg.seed, i) for i in indices]

    sum_v = sum_v2 = sum_nu = sum_nu2 = None
    rec_theta = None
    if collect:
        rec_theta = np.empty((n_rec, n))
    else:
        sum_v = np.zeros(n_rec)
        sum_v2 = np.zeros(n_rec)
        sum_nu = np.zeros(n_rec)
        sum_nu2 = np.zeros(n_rec)

    def record(slot: int):
        if collect:
            rec_theta[slot] = th
            return
        lam = 0.5 * np.sin(th)
        nu = 0.5 * (1.0 + np.cos(th))
        v = cp.c * nu + cp.d * lam * nu - lam * lam - nu * nu
        sum_v[slot] += v.sum()
        sum_v2[slot] += (v * v).sum()
        sum_nu[slot] += nu.sum()
        sum_nu2[slot] += (nu * nu).sum()

    absorbed_step = np.full(n, -1, dtype=np.int64)
    first_exit_step = np.full(n, -1, dtype=np.int64)
    first_exit_side = np.zeros(n, dtype=np.int8)
    max_theta = np.full(n, float(theta0))

    hit = math.pi - abs(theta0) <= angle_tol
    active = np.ones(n, dtype=bool)
    if hit:
        th[:] = math.copysign(math.pi, theta0)
        absorbed_step[:] = 0
        first_exit_step[:] = 0
        first_exit_side[:] = 1
        active[:] = False

    record(0)
    slot = 1
    next_rec = cfg.record_stride

    step = 0
    while step < n_steps:
        if not active.any():
            # every path is frozen at +-pi; the remaining records repeat
            while slot < n_rec:
                record(slot)
                slot += 1
            break
        nblk = min(NOISE_BLOCK, n_steps - step)
        noise = np.empty((n, nblk))
        for i, rng in enumerate(rngs):
            noise[i] = rng.standard_normal(nblk)
        noise *= sdt
        for b in range(nblk):
            dw = noise[:, b]
            drift, diff = pure_sde_terms(th, pp.m, pp.g1, pp.g2)
            proposal = np.clip(th + drift * dt + diff * dw, -math.pi, math.pi)
            th = np.where(active, proposal, th)
            k = step + b + 1
            if not np.isfinite(th).all():
                bad = np.flatnonzero(~np.isfinite(th))[0]
                raise IntegrationError(path_index=indices[int(bad)], step=k)
            np.maximum(max_theta, th, out=max_theta)
            hit_target = active & (math.pi - np.abs(th) <= angle_tol)
            if hit_target.any():
                th = np.where(hit_target, np.copysign(math.pi, th), th)
                absorbed_step[hit_target] = k
                newly = hit_target & (first_exit_step < 0)
                first_exit_step[newly] = k
                first_exit_side[newly] = 1
                active &= ~hit_target
            if from_jplus:
                crossed = active & (th <= 0.0) & (first_exit_step < 0)
                first_exit_step[crossed] = k
                first_exit_side[crossed] = -1
            if k == next_rec:
                record(slot)
                slot += 1
                next_rec += cfg.record_stride
        step += nblk

    dt_of = lambda steps: np.where(steps >= 0, steps * dt, np.inf)
    return _PureChunk(sum_v, sum_v2, sum_nu, sum_nu2,
                      dt_of(absorbed_step), dt_of(first_exit_step),
                      first_exit_side, max_theta, rec_theta)


def _validate_theta0(theta0: float):
    if not -math.pi < theta0 < math.pi:
        raise DomainError(
            f"starting angle must lie strictly inside (-pi, pi), got {theta0}")


def _run_pure_chunks(theta0, pp, cfg, angle_tol, cp, workers):
    ranges = [range(lo, min(lo + CHUNK, cfg.n_paths))
              for lo in range(0, cfg.n_paths, CHUNK)]
    if workers <= 1 or len(ranges) == 1:
        return [_integrate_pure_chunk(theta0, pp, cfg, r, angle_tol, cp, False)
                for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(
            lambda r: _integrate_pure_chunk(theta0, pp, cfg, r, angle_tol, cp, False),
            ranges))


def simulate_pure_path(theta0: PureAngle, pp: PureParams, cfg: SimConfig,
                       path_index: int = 0) -> PureTrajectory:
    """Single recorded angle path, identical to the same index of an ensemble."""
    _validate_theta0(theta0)
    one = SimConfig(dt=cfg.dt, t_max=cfg.t_max, seed=cfg.seed, n_paths=1,
                    record_stride=cfg.record_stride,
                    convergence_radius=cfg.convergence_radius)
    res = _integrate_pure_chunk(theta0, pp, one, range(path_index, path_index + 1),
                                DEFAULT_ANGLE_TOL, CertificateParams(), collect=True)
    times = np.arange(0, one.n_steps + 1, one.record_stride) * one.dt
    conv = float(res.converged_at[0])
    return PureTrajectory(times=times, thetas=res.rec_theta[:, 0].copy(),
                          converged_at=None if math.isinf(conv) else conv)


def pure_exit_details(theta0: PureAngle, pp: PureParams, cfg: SimConfig,
                      angle_tol: float = DEFAULT_ANGLE_TOL) -> PureExitDetails:
    """Per-path absorption and first-exit bookkeeping for one ensemble."""
    _validate_theta0(theta0)
    chunks = _run_pure_chunks(theta0, pp, cfg, angle_tol, CertificateParams(), 1)
    return PureExitDetails(
        converged_at=np.concatenate([c.converged_at for c in chunks]),
        first_exit_time=np.concatenate([c.first_exit_time for c in chunks]),
        first_exit_side=np.concatenate([c.first_exit_side for c in chunks]),
        max_theta=np.concatenate([c.max_theta for c in chunks]),
    )


def simulate_pure_exit(theta0: PureAngle, pp: PureParams, cfg: SimConfig,
                       angle_tol: float = DEFAULT_ANGLE_TOL,
                       cp: CertificateParams | None = None,
                       workers: int = 1) -> EnsembleSummary:
    """Target-absorption Monte Carlo on the boundary circle.

    Paths are absorbed (and frozen at +-pi) once within ``angle_tol`` of
    the target; the summary reports the mean boundary-state curves, the
    not-yet-absorbed fraction, and a least-squares exponential rate fitted
    to the tail (second half of the horizon) of that fraction.
    """
    _validate_theta0(theta0)
    cp = cp or CertificateParams()
    chunks = _run_pure_chunks(theta0, pp, cfg, angle_tol, cp, workers)
    n = cfg.n_paths
    times = np.arange(0, cfg.n_steps + 1, cfg.record_stride) * cfg.dt
    sum_v = np.zeros_like(times)
    sum_v2 = np.zeros_like(times)
    sum_nu = np.zeros_like(times)
    sum_nu2 = np.zeros_like(times)
    for ch in chunks:
        sum_v += ch.sum_v
        sum_v2 += ch.sum_v2
        sum_nu += ch.sum_nu
        sum_nu2 += ch.sum_nu2
    converged_at = np.concatenate([ch.converged_at for ch in chunks])
    mean_v = sum_v / n
    mean_nu = sum_nu / n
    sem_v = np.sqrt(np.maximum(sum_v2 / n - mean_v * mean_v, 0.0) / n)
    sem_nu = np.sqrt(np.maximum(sum_nu2 / n - mean_nu * mean_nu, 0.0) / n)
    unconverged = (converged_at[None, :] > times[:, None]).mean(axis=1)
    return EnsembleSummary(
        n_paths=n,
        fraction_converged=float(np.isfinite(converged_at).mean()),
        times=times,
        mean_v=mean_v,
        mean_nu=mean_nu,
        sem_v=sem_v,
        sem_nu=sem_nu,
        unconverged_fraction=unconverged,
        fitted_rate=fit_tail_rate(times, unconverged, 0.5 * cfg.t_max),
    )
