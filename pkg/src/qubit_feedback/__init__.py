"""Desk-scale simulation and verification of measurement-based qubit feedback control.

The package covers three connected pieces of machinery for a continuously
monitored qubit under linear state feedback:

* a seeded Euler-Maruyama simulator of the reduced conditional-state SDE
  on the state disc, with Monte Carlo ensembles and convergence statistics,
* a numerical Lyapunov certificate deciding global stability of the target
  state from the sign of a bounded auxiliary function on a compact box, and
* pure-state (boundary) analysis: first-exit-time Monte Carlo and the
  power-series rate spectrum of the associated exit-time operator.
"""

__version__ = "0.1.0"

from .dynamics import (DriftDiffusion, ExperimentParams, controller,
                       drift_diffusion, generator_apply, generator_apply_full)
from .errors import (DomainError, IntegrationError, ParameterError,
                     ResonantRecursionError)
from .lyapunov import (CertificateParams, CertificateResult, certify, f_aux,
                       f_axis_quadratic, f_boundary_value, lv_closed_form,
                       lyapunov_v)
from .pure_states import (EigenMode, PureExitDetails, PureParams,
                          PureTrajectory, SpectrumResult, change_of_variable,
                          eigen_recursion, h_function, pure_drift_diffusion,
                          pure_exit_details, simulate_pure_exit,
                          simulate_pure_path, spectrum, weight_functions)
from .simulator import (EnsembleSummary, SimConfig, Trajectory,
                        ensemble_max_step_defect, mean_generator_check,
                        run_ensemble, simulate_path)
from .state_space import (PolarState, PureAngle, QubitState, from_polar,
                          membership_defect, project_to_disc, to_polar,
                          wrap_angle)

__all__ = [
    "CertificateParams", "CertificateResult", "DomainError", "DriftDiffusion",
    "EigenMode", "EnsembleSummary", "ExperimentParams", "IntegrationError",
    "ParameterError", "PolarState", "PureAngle", "PureExitDetails",
    "PureParams", "PureTrajectory", "QubitState", "ResonantRecursionError",
    "SimConfig", "SpectrumResult", "Trajectory", "certify",
    "change_of_variable", "controller", "drift_diffusion", "eigen_recursion",
    "ensemble_max_step_defect", "f_aux", "f_axis_quadratic",
    "f_boundary_value", "from_polar", "generator_apply",
    "generator_apply_full", "h_function", "lv_closed_form", "lyapunov_v",
    "mean_generator_check", "membership_defect", "project_to_disc",
    "pure_drift_diffusion", "pure_exit_details", "run_ensemble",
    "simulate_path", "simulate_pure_exit", "simulate_pure_path", "spectrum",
    "to_polar", "weight_functions", "wrap_angle",
]
