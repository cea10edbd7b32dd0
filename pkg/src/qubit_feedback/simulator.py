"""Seeded Euler-Maruyama integration of the 2-D conditional-state SDE.

One scalar Wiener increment drives both coordinates, matching the single
innovations process of the monitored system.  Each step is followed by a
radial projection back onto the state disc; the scheme is plain
Euler-Maruyama because the projection already controls the dominant
manifold-violation error and keeps the integrator auditable.

Reproducibility contract: path i of a run draws its Gaussian increments
from an independent stream keyed by (seed, i) through numpy's
SeedSequence spawning, so results are bit-identical for a given (seed,
n_paths, dt) regardless of chunking, execution order, or worker count.
Ensembles are processed in fixed chunks of 256 paths; per-chunk partial
sums are combined in chunk order, which pins the floating-point reduction
order as well.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ExperimentParams, sde_terms
from .errors import IntegrationError, ParameterError
from .lyapunov import CertificateParams, lv_closed_form, lyapunov_v
from .state_space import QubitState, disc_defect, project_arrays

#: fixed ensemble chunk width; never derived from worker count
CHUNK = 256
#: Gaussian increments are drawn this many steps at a time per path
NOISE_BLOCK = 1024


@dataclass(frozen=True)
class SimConfig:
    """Time step, horizon, seeding and recording controls for one run."""

    dt: float
    t_max: float
    seed: int
    n_paths: int = 1
    record_stride: int = 1
    convergence_radius: float = 1e-2

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.t_max < self.dt:
            raise ParameterError("t_max must be at least one time step")
        if self.n_paths < 1:
            raise ParameterError("n_paths must be positive")
        if self.record_stride < 1:
            raise ParameterError("record_stride must be at least 1")
        if not self.convergence_radius > 0.0:
            raise ParameterError("convergence_radius must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ParameterError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Recorded sample path of the state SDE.

    ``converged_at`` is the first time after which the state never leaves
    the convergence ball again within the simulated horizon (None if it is
    still outside at the final step).  ``max_step_defect`` is the largest
    pre-projection disc violation seen along the path, a direct measure of
    the per-step manifold error of the scheme.
    """

    times: np.ndarray
    lams: np.ndarray
    nus: np.ndarray
    converged_at: float | None
    max_step_defect: float

    @property
    def states(self) -> list[QubitState]:
        return [QubitState(float(l), float(n)) for l, n in zip(self.lams, self.nus)]


@dataclass(frozen=True)
class EnsembleSummary:
    """Cross-path statistics on the recorded time grid."""

    n_paths: int
    fraction_converged: float
    times: np.ndarray
    mean_v: np.ndarray
    mean_nu: np.ndarray
    sem_v: np.ndarray
    sem_nu: np.ndarray
    unconverged_fraction: np.ndarray
    fitted_rate: float | None

    @property
    def mean_v_curve(self) -> list[tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.mean_v)]

    @property
    def mean_nu_curve(self) -> list[tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.mean_nu)]


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent Gaussian stream for one path, keyed by (seed, path_index)."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.PCG64(seq))


def fit_tail_rate(times: np.ndarray, fraction: np.ndarray, t_lo: float) -> float | None:
    """Least-squares slope of log(fraction) vs time on t >= t_lo, positive points only.

    Returns the decay rate (positive for decaying curves), or None when
    fewer than two usable points remain.
    """
    mask = (times >= t_lo) & (fraction > 0.0)
    if int(mask.sum()) < 2:
        return None
    t = times[mask]
    y = np.log(fraction[mask])
    a = np.vstack([np.ones(t.size), t]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(-coef[1]) + 0.0  # normalize -0.0


@dataclass
class _ChunkResult:
    sum_v: np.ndarray | None
    sum_v2: np.ndarray | None
    sum_nu: np.ndarray | None
    sum_nu2: np.ndarray | None
    converged_at: np.ndarray = field(default_factory=lambda: np.empty(0))
    max_defect: np.ndarray = field(default_factory=lambda: np.empty(0))
    rec_lam: np.ndarray | None = None
    rec_nu: np.ndarray | None = None


def _integrate_chunk(s0: QubitState, ep: ExperimentParams, cfg: SimConfig,
                     indices: range, cp: CertificateParams,
                     collect: bool) -> _ChunkResult:
    """Advance one chunk of paths through the full horizon.

    In collect mode the recorded states are stored per path; otherwise
    only running cross-path sums of nu and V at recorded steps are kept.
    """
    n = len(indices)
    n_steps = cfg.n_steps
    dt = cfg.dt
    sdt = math.sqrt(dt)
    r2 = cfg.convergence_radius ** 2
    rec_indices = range(0, n_steps + 1, cfg.record_stride)
    n_rec = len(rec_indices)

    lam = np.full(n, float(s0.lam))
    nu = np.full(n, float(s0.nu))
    rngs = [path_generator(cfg.seed, i) for i in indices]

    sum_v = sum_v2 = sum_nu = sum_nu2 = None
    rec_lam = rec_nu = None
    if collect:
        rec_lam = np.empty((n_rec, n))
        rec_nu = np.empty((n_rec, n))
    else:
        sum_v = np.zeros(n_rec)
        sum_v2 = np.zeros(n_rec)
        sum_nu = np.zeros(n_rec)
        sum_nu2 = np.zeros(n_rec)

    def record(slot: int):
        if collect:
            rec_lam[slot] = lam
            rec_nu[slot] = nu
        else:
            v = cp.c * nu + cp.d * lam * nu - lam * lam - nu * nu
            sum_v[slot] += v.sum()
            sum_v2[slot] += (v * v).sum()
            sum_nu[slot] += nu.sum()
            sum_nu2[slot] += (nu * nu).sum()

    last_exceed = np.where(lam * lam + nu * nu > r2, 0, -1)
    max_defect = np.zeros(n)
    record(0)
    slot = 1
    next_rec = cfg.record_stride

    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while step < n_steps:
            nblk = min(NOISE_BLOCK, n_steps - step)
            noise = np.empty((n, nblk))
            for i, rng in enumerate(rngs):
                noise[i] = rng.standard_normal(nblk)
            noise *= sdt
            for b in range(nblk):
                dw = noise[:, b]
                drift_l, drift_n, diff_l, diff_n = sde_terms(
                    lam, nu, ep.m, ep.eta, ep.g1, ep.g2)
                lam_new = lam + drift_l * dt + diff_l * dw
                nu_new = nu + drift_n * dt + diff_n * dw
                k = step + b + 1
                # the defect squares the coordinates, so it goes non-finite
                # as soon as any coordinate does (or overflows itself)
                defect = disc_defect(lam_new, nu_new)
                if not np.isfinite(defect).all():
                    bad = np.flatnonzero(~np.isfinite(defect))[0]
                    raise IntegrationError(path_index=indices[int(bad)], step=k)
                np.maximum(max_defect, defect, out=max_defect)
                lam, nu = project_arrays(lam_new, nu_new)
                exceed = lam * lam + nu * nu > r2
                last_exceed[exceed] = k
                if k == next_rec:
                    record(slot)
                    slot += 1
                    next_rec += cfg.record_stride
            step += nblk

    converged_at = np.where(last_exceed < n_steps, (last_exceed + 1) * dt, np.inf)
    return _ChunkResult(sum_v, sum_v2, sum_nu, sum_nu2, converged_at,
                        np.maximum(max_defect, 0.0), rec_lam, rec_nu)


def _chunk_ranges(n_paths: int):
    return [range(lo, min(lo + CHUNK, n_paths)) for lo in range(0, n_paths, CHUNK)]


def _run_chunks(s0, ep, cfg, cp, workers: int) -> list[_ChunkResult]:
    ranges = _chunk_ranges(cfg.n_paths)
    if workers <= 1 or len(ranges) == 1:
        return [_integrate_chunk(s0, ep, cfg, r, cp, collect=False) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(
            lambda r: _integrate_chunk(s0, ep, cfg, r, cp, collect=False), ranges))


def simulate_path(s0: QubitState, ep: ExperimentParams, cfg: SimConfig,
                  path_index: int = 0) -> Trajectory:
    """Integrate a single path; identical to path ``path_index`` of an ensemble."""
    one = SimConfig(dt=cfg.dt, t_max=cfg.t_max, seed=cfg.seed, n_paths=1,
                    record_stride=cfg.record_stride,
                    convergence_radius=cfg.convergence_radius)
    res = _integrate_chunk(s0, ep, one, range(path_index, path_index + 1),
                           CertificateParams(), collect=True)
    times = np.arange(0, one.n_steps + 1, one.record_stride) * one.dt
    conv = float(res.converged_at[0])
    return Trajectory(
        times=times,
        lams=res.rec_lam[:, 0].copy(),
        nus=res.rec_nu[:, 0].copy(),
        converged_at=None if math.isinf(conv) else conv,
        max_step_defect=float(res.max_defect[0]),
    )


def _summarize(cfg: SimConfig, chunks: list[_ChunkResult]) -> EnsembleSummary:
    n = cfg.n_paths
    times = np.arange(0, cfg.n_steps + 1, cfg.record_stride) * cfg.dt
    sum_v = np.zeros_like(times)
    sum_v2 = np.zeros_like(times)
    sum_nu = np.zeros_like(times)
    sum_nu2 = np.zeros_like(times)
    for ch in chunks:  # fixed chunk order pins the reduction
        sum_v += ch.sum_v
        sum_v2 += ch.sum_v2
        sum_nu += ch.sum_nu
        sum_nu2 += ch.sum_nu2
    converged_at = np.concatenate([ch.converged_at for ch in chunks])
    mean_v = sum_v / n
    mean_nu = sum_nu / n
    var_v = np.maximum(sum_v2 / n - mean_v * mean_v, 0.0)
    var_nu = np.maximum(sum_nu2 / n - mean_nu * mean_nu, 0.0)
    sem_v = np.sqrt(var_v / n)
    sem_nu = np.sqrt(var_nu / n)
    unconverged = (converged_at[None, :] > times[:, None]).mean(axis=1)
    rate = fit_tail_rate(times, unconverged, 0.5 * cfg.t_max)
    return EnsembleSummary(
        n_paths=n,
        fraction_converged=float(np.isfinite(converged_at).mean()),
        times=times,
        mean_v=mean_v,
        mean_nu=mean_nu,
        sem_v=sem_v,
        sem_nu=sem_nu,
        unconverged_fraction=unconverged,
        fitted_rate=rate,
    )


def run_ensemble(s0: QubitState, ep: ExperimentParams, cfg: SimConfig,
                 cp: CertificateParams | None = None,
                 workers: int = 1) -> EnsembleSummary:
    """Monte Carlo ensemble of the state SDE with convergence statistics.

    The Lyapunov constants enter only through the reported mean-V curve;
    when ``cp`` is omitted the default constants (c, d) = (4, 2) are used.
    ``workers`` parallelizes over fixed 256-path chunks without affecting
    any output bit.
    """
    cp = cp or CertificateParams()
    chunks = _run_chunks(s0, ep, cfg, cp, workers)
    return _summarize(cfg, chunks)


def ensemble_max_step_defect(s0: QubitState, ep: ExperimentParams,
                             cfg: SimConfig) -> float:
    """Largest pre-projection disc violation over all paths of an ensemble.

    The per-step violation of the Euler scheme is O(dt), so halving dt
    should reduce this measure by roughly half; used as an
    order-of-accuracy check for boundary (pure-state) starts.
    """
    chunks = _run_chunks(s0, ep, cfg, CertificateParams(), workers=1)
    return float(max(ch.max_defect.max() for ch in chunks))


def generator_statistics(s0: QubitState, ep: ExperimentParams, cfg: SimConfig,
                         cp: CertificateParams,
                         delta: float | None = None) -> tuple[float, float]:
    """Finite-difference estimate of d E[V(x_t)]/dt at t = 0, with its standard error.

    Runs cfg.n_paths short paths over a window delta (default 10 dt) and
    returns ((E[V(x_delta)] - V(x_0))/delta, stderr).
    """
    if delta is None:
        delta = 10.0 * cfg.dt
    n_steps = max(1, int(round(delta / cfg.dt)))
    window = n_steps * cfg.dt
    short = SimConfig(dt=cfg.dt, t_max=window, seed=cfg.seed, n_paths=cfg.n_paths,
                      record_stride=n_steps,
                      convergence_radius=cfg.convergence_radius)
    summary = run_ensemble(s0, ep, short, cp)
    estimate = (float(summary.mean_v[-1]) - lyapunov_v(s0, cp)) / window
    stderr = float(summary.sem_v[-1]) / window
    return estimate, stderr


def mean_generator_check(s0: QubitState, ep: ExperimentParams, cfg: SimConfig,
                         cp: CertificateParams,
                         delta: float | None = None) -> float:
    """Discrepancy between the Monte Carlo slope of E[V] and the closed-form generator value.

    Statistical consistency check of the integrator against
    ``lv_closed_form``: the discrepancy is expected to vanish within a few
    standard errors plus an O(delta) finite-difference bias.
    """
    estimate, _ = generator_statistics(s0, ep, cfg, cp, delta)
    return estimate - lv_closed_form(s0, ep, cp)
