"""Command-line front end.

Subcommands: certify, simulate, ensemble, exit-time, spectrum.  Every run
writes its data files plus a JSON manifest recording all resolved
parameters (including defaults); ``--manifest FILE`` replays a previous
run and reproduces its data files byte-identically.

Exit status: 0 success (certify: certified), 1 usage/parameter/I-O error,
2 certificate not granted, 3 integration blow-up.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .dynamics import ExperimentParams
from .errors import DomainError, IntegrationError, ParameterError
from .exports import (RunManifest, read_manifest, write_certificate,
                      write_coefficients, write_manifest, write_spectrum,
                      write_summary, write_trajectory)
from .lyapunov import CertificateParams, certify
from .pure_states import PureParams, simulate_pure_exit, spectrum
from .simulator import SimConfig, run_ensemble, simulate_path
from .state_space import QubitState


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_gain_flags(p, with_eta: bool):
    p.add_argument("--m", type=float, required=True, help="measurement rate M in Hz")
    if with_eta:
        p.add_argument("--eta", type=float, required=True,
                       help="detection efficiency in (0, 1]")
    p.add_argument("--g1", type=float, required=True, help="feedback gain g1 in Hz")
    p.add_argument("--g2", type=float, required=True, help="feedback gain g2 in Hz")


def _add_lyapunov_flags(p, required: bool):
    p.add_argument("--c", type=float, required=required, default=None if required else 4.0,
                   help="Lyapunov constant c > 1")
    p.add_argument("--d", type=float, required=required, default=None if required else 2.0,
                   help="Lyapunov constant d in (0, 2(c-1))")


def _add_out_flag(p):
    p.add_argument("--out", type=Path, default=Path("."),
                   help="directory for output files (default: current directory)")


def build_parser() -> _Parser:
    parser = _Parser(prog="qubit-feedback",
                     description="Monitored-qubit feedback control toolkit")
    parser.add_argument("--manifest", type=Path, default=None,
                        help="replay a previous run from its manifest file")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory override for --manifest replay")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("certify", help="decide the Lyapunov stability certificate")
    _add_gain_flags(p, with_eta=True)
    _add_lyapunov_flags(p, required=True)
    p.add_argument("--grid-r", type=int, default=201)
    p.add_argument("--grid-theta", type=int, default=629)
    p.add_argument("--refine-depth", type=int, default=3)
    p.add_argument("--safety-margin", type=float, default=1e-6)
    _add_out_flag(p)

    p = sub.add_parser("simulate", help="integrate a single conditional-state path")
    _add_gain_flags(p, with_eta=True)
    p.add_argument("--lambda0", type=float, required=True)
    p.add_argument("--nu0", type=float, required=True)
    p.add_argument("--dt", type=float, default=None, help="time step (default 1e-3/M)")
    p.add_argument("--t-max", type=float, default=None, help="horizon (default 50/M)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--record-stride", type=int, default=1)
    p.add_argument("--convergence-radius", type=float, default=1e-2)
    _add_lyapunov_flags(p, required=False)
    _add_out_flag(p)

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble of state paths")
    _add_gain_flags(p, with_eta=True)
    p.add_argument("--lambda0", type=float, required=True)
    p.add_argument("--nu0", type=float, required=True)
    p.add_argument("--n-paths", type=int, required=True)
    p.add_argument("--dt", type=float, default=None, help="time step (default 1e-3/M)")
    p.add_argument("--t-max", type=float, default=None, help="horizon (default 50/M)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--record-stride", type=int, default=1)
    p.add_argument("--convergence-radius", type=float, default=1e-2)
    p.add_argument("--workers", type=int, default=1)
    _add_lyapunov_flags(p, required=False)
    _add_out_flag(p)

    p = sub.add_parser("exit-time", help="pure-state exit-time Monte Carlo")
    _add_gain_flags(p, with_eta=False)
    p.add_argument("--theta0", type=float, required=True)
    p.add_argument("--n-paths", type=int, required=True)
    p.add_argument("--dt", type=float, default=None, help="time step (default 1e-3/M)")
    p.add_argument("--t-max", type=float, default=None, help="horizon (default 20/M)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--angle-tol", type=float, default=1e-3)
    p.add_argument("--record-stride", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    _add_lyapunov_flags(p, required=False)
    _add_out_flag(p)

    p = sub.add_parser("spectrum", help="rate spectrum of the series operator")
    _add_gain_flags(p, with_eta=False)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--order", type=int, default=None,
                   help="series truncation order (default n-max + 10)")
    _add_out_flag(p)

    return parser


def _run_certify(params: dict, out_dir: Path) -> int:
    ep = ExperimentParams(m=params["m"], eta=params["eta"],
                          g1=params["g1"], g2=params["g2"])
    cp = CertificateParams(c=params["c"], d=params["d"],
                           grid_r=params["grid_r"],
                           grid_theta=params["grid_theta"],
                           refine_depth=params["refine_depth"],
                           safety_margin=params["safety_margin"])
    result = certify(ep, cp)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_certificate(out_dir / "certificate.json", result)
    manifest = RunManifest("certify", params, seed=None,
                           artifact_version=__version__,
                           outputs=["certificate.json"])
    write_manifest(out_dir / "certify_manifest.json", manifest)
    print(f"certified={result.certified} f_max={result.f_max_estimate:.6g} "
          f"argmax=(r={result.argmax.r:.4f}, theta={result.argmax.theta:.4f}) "
          f"necessary_conditions={result.necessary_conditions_hold} "
          f"evaluations={result.grid_evaluations}")
    return 0 if result.certified else 2


def _run_simulate(params: dict, out_dir: Path) -> int:
    ep = ExperimentParams(m=params["m"], eta=params["eta"],
                          g1=params["g1"], g2=params["g2"])
    cfg = SimConfig(dt=params["dt"], t_max=params["t_max"], seed=params["seed"],
                    n_paths=1, record_stride=params["record_stride"],
                    convergence_radius=params["convergence_radius"])
    _validate_lyapunov(params)
    traj = simulate_path(QubitState(params["lambda0"], params["nu0"]), ep, cfg,
                         path_index=params["path_index"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory(out_dir / "trajectory.csv", traj, params["c"], params["d"])
    manifest = RunManifest("simulate", params, seed=params["seed"],
                           artifact_version=__version__,
                           outputs=["trajectory.csv"])
    write_manifest(out_dir / "simulate_manifest.json", manifest)
    conv = "never" if traj.converged_at is None else f"{traj.converged_at:.6g}"
    print(f"steps={len(traj.times) - 1} converged_at={conv} "
          f"max_step_defect={traj.max_step_defect:.3g}")
    return 0


def _run_ensemble(params: dict, out_dir: Path) -> int:
    ep = ExperimentParams(m=params["m"], eta=params["eta"],
                          g1=params["g1"], g2=params["g2"])
    cfg = SimConfig(dt=params["dt"], t_max=params["t_max"], seed=params["seed"],
                    n_paths=params["n_paths"],
                    record_stride=params["record_stride"],
                    convergence_radius=params["convergence_radius"])
    cp = _validate_lyapunov(params)
    summary = run_ensemble(QubitState(params["lambda0"], params["nu0"]), ep, cfg,
                           cp, workers=params["workers"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary(out_dir / "summary.csv", summary)
    manifest = RunManifest("ensemble", params, seed=params["seed"],
                           artifact_version=__version__, outputs=["summary.csv"])
    write_manifest(out_dir / "ensemble_manifest.json", manifest)
    rate = "n/a" if summary.fitted_rate is None else f"{summary.fitted_rate:.4g}"
    print(f"fraction_converged={summary.fraction_converged:.4f} fitted_rate={rate}")
    return 0


def _run_exit_time(params: dict, out_dir: Path) -> int:
    pp = PureParams(m=params["m"], g1=params["g1"], g2=params["g2"])
    cfg = SimConfig(dt=params["dt"], t_max=params["t_max"], seed=params["seed"],
                    n_paths=params["n_paths"],
                    record_stride=params["record_stride"])
    cp = _validate_lyapunov(params)
    summary = simulate_pure_exit(params["theta0"], pp, cfg,
                                 angle_tol=params["angle_tol"], cp=cp,
                                 workers=params["workers"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary(out_dir / "exit_summary.csv", summary)
    manifest = RunManifest("exit-time", params, seed=params["seed"],
                           artifact_version=__version__,
                           outputs=["exit_summary.csv"])
    write_manifest(out_dir / "exit-time_manifest.json", manifest)
    rate = "n/a" if summary.fitted_rate is None else f"{summary.fitted_rate:.4g}"
    print(f"fraction_converged={summary.fraction_converged:.4f} fitted_rate={rate}")
    return 0


def _run_spectrum(params: dict, out_dir: Path) -> int:
    pp = PureParams(m=params["m"], g1=params["g1"], g2=params["g2"])
    if params.get("order") is None:
        params = dict(params, order=params["n_max"] + 10)
    result = spectrum(pp, params["n_max"], params["order"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_spectrum(out_dir / "spectrum.csv", result, pp.m)
    write_coefficients(out_dir / "coefficients.csv", result)
    manifest = RunManifest("spectrum", params, seed=None,
                           artifact_version=__version__,
                           outputs=["spectrum.csv", "coefficients.csv"])
    write_manifest(out_dir / "spectrum_manifest.json", manifest)
    lams = ", ".join(f"{v:.10g}" for v in result.eigenvalues)
    rates = ", ".join(f"{0.5 * pp.m * v:.10g}" for v in result.eigenvalues)
    print(f"lambda_n = {lams} | physical rates (Hz) = {rates}")
    return 0


def _validate_lyapunov(params: dict) -> CertificateParams:
    return CertificateParams(c=params["c"], d=params["d"])


_RUNNERS = {
    "certify": _run_certify,
    "simulate": _run_simulate,
    "ensemble": _run_ensemble,
    "exit-time": _run_exit_time,
    "spectrum": _run_spectrum,
}

#: manifest/params keys per subcommand, in flag order
_PARAM_KEYS = {
    "certify": ["m", "eta", "g1", "g2", "c", "d", "grid_r", "grid_theta",
                "refine_depth", "safety_margin"],
    "simulate": ["m", "eta", "g1", "g2", "lambda0", "nu0", "dt", "t_max",
                 "seed", "path_index", "record_stride", "convergence_radius",
                 "c", "d"],
    "ensemble": ["m", "eta", "g1", "g2", "lambda0", "nu0", "n_paths", "dt",
                 "t_max", "seed", "record_stride", "convergence_radius",
                 "workers", "c", "d"],
    "exit-time": ["m", "g1", "g2", "theta0", "n_paths", "dt", "t_max", "seed",
                  "angle_tol", "record_stride", "workers", "c", "d"],
    "spectrum": ["m", "g1", "g2", "n_max", "order"],
}


def _resolve_defaults(sub: str, params: dict) -> dict:
    """Fill horizon and step defaults that depend on the measurement rate."""
    out = dict(params)
    if sub in ("simulate", "ensemble", "exit-time"):
        if out.get("dt") is None:
            out["dt"] = 1e-3 / out["m"]
        if out.get("t_max") is None:
            out["t_max"] = (20.0 if sub == "exit-time" else 50.0) / out["m"]
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.manifest is not None:
            manifest = read_manifest(args.manifest)
            if manifest.subcommand not in _RUNNERS:
                print(f"error: unknown subcommand {manifest.subcommand!r} in manifest",
                      file=sys.stderr)
                return 1
            out_dir = args.out if args.out is not None else args.manifest.parent
            return _RUNNERS[manifest.subcommand](manifest.params, out_dir)
        if args.subcommand is None:
            print("error: a subcommand or --manifest is required", file=sys.stderr)
            return 1
        params = {k: getattr(args, k) for k in _PARAM_KEYS[args.subcommand]}
        params = _resolve_defaults(args.subcommand, params)
        return _RUNNERS[args.subcommand](params, args.out)
    except (ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        target = getattr(exc, "filename", None) or "output"
        print(f"error: cannot write {target}: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
