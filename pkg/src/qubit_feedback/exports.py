"""Plot-ready text exports and the run manifest.

Data files are comma-separated with a header row; floats are written with
``repr`` (shortest round-trip form), so identical runs produce
byte-identical files.  The manifest is a JSON record of every parameter a
run resolved (including defaults), sufficient to replay it exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

from .lyapunov import CertificateResult
from .pure_states import SpectrumResult
from .simulator import EnsembleSummary, Trajectory


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory(path, traj: Trajectory, c: float, d: float) -> None:
    """Columns t, lambda, nu, V; V evaluated with the given Lyapunov constants."""
    lines = ["t,lambda,nu,V"]
    for t, lam, nu in zip(traj.times, traj.lams, traj.nus):
        v = c * nu + d * lam * nu - lam * lam - nu * nu
        lines.append(f"{_fmt(t)},{_fmt(lam)},{_fmt(nu)},{_fmt(v)}")
    _write_text(path, "\n".join(lines) + "\n")


def write_summary(path, summary: EnsembleSummary) -> None:
    """Columns t, mean_nu, mean_V, unconverged_fraction."""
    lines = ["t,mean_nu,mean_V,unconverged_fraction"]
    for t, mn, mv, u in zip(summary.times, summary.mean_nu, summary.mean_v,
                            summary.unconverged_fraction):
        lines.append(f"{_fmt(t)},{_fmt(mn)},{_fmt(mv)},{_fmt(u)}")
    _write_text(path, "\n".join(lines) + "\n")


def write_spectrum(path, result: SpectrumResult, m: float) -> None:
    """Columns n, eigenvalue, rate_hz (physical rate (m/2) * eigenvalue)."""
    lines = ["n,eigenvalue,rate_hz"]
    for i, lam in enumerate(result.eigenvalues, start=1):
        lines.append(f"{i},{_fmt(lam)},{_fmt(0.5 * m * lam)}")
    _write_text(path, "\n".join(lines) + "\n")


def write_coefficients(path, result: SpectrumResult) -> None:
    """Columns n, k, a_k for every mode in the spectrum."""
    lines = ["n,k,a_k"]
    for i, coeffs in enumerate(result.coefficient_tables, start=1):
        for k, a in enumerate(coeffs):
            lines.append(f"{i},{k},{_fmt(a)}")
    _write_text(path, "\n".join(lines) + "\n")


def write_certificate(path, result: CertificateResult) -> None:
    record = {
        "certified": result.certified,
        "f_max_estimate": result.f_max_estimate,
        "argmax": {"r": result.argmax.r, "theta": result.argmax.theta},
        "necessary_conditions_hold": result.necessary_conditions_hold,
        "grid_evaluations": result.grid_evaluations,
    }
    _write_text(path, json.dumps(record, indent=2) + "\n")


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run: command, resolved params, seed."""

    subcommand: str
    params: dict[str, Any]
    seed: int | None
    artifact_version: str
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat())
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "subcommand": self.subcommand,
                "artifact_version": self.artifact_version,
                "timestamp": self.timestamp,
                "seed": self.seed,
                "params": self.params,
                "outputs": self.outputs,
            },
            indent=2,
        ) + "\n"

    @staticmethod
    def from_json(text: str) -> "RunManifest":
        raw = json.loads(text)
        return RunManifest(
            subcommand=raw["subcommand"],
            params=raw["params"],
            seed=raw["seed"],
            artifact_version=raw["artifact_version"],
            timestamp=raw["timestamp"],
            outputs=list(raw.get("outputs", [])),
        )


def write_manifest(path, manifest: RunManifest) -> None:
    _write_text(path, manifest.to_json())


def read_manifest(path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return RunManifest.from_json(fh.read())
