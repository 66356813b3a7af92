"""Targeted exploration input design for linear system identification.

Given a prior parameter set and an accuracy target, designs a minimum-energy
multisine input whose excitation provably shrinks the least-squares
confidence ellipsoid below the target, with high probability and in finite
time.  The design problem is a sequence of semidefinite programs solved by
the bundled interior-point solver; a Monte Carlo harness validates the
guarantee chain on simulated data.
"""

from .bounds import (BoundConstants, DecayEnvelope, ScenarioConstants,
                     compute_bound_constants, disturbance_gamma_w,
                     excitation_lower_bound_check, fit_decay_envelope,
                     transient_gamma_u)
from .design import (DesignResult, DesignSpec, assemble_exploration_program,
                     run_algorithm_1, solve_exploration_sdp)
from .errors import (ConfigError, DataError, DimensionError, DomainError,
                     GridError, InfeasibleError, NumericalError, ResolventError,
                     ResourceError, StabilityError)
from .estimation import (ConfidenceEllipsoid, Excitation, confidence_ellipsoid,
                         data_sufficient, ellipsoid_contains, goal_satisfied,
                         radius_R, rls_estimate)
from .harness import (RunConfig, cmd_constants, cmd_design, cmd_sweep,
                      cmd_validate, load_config, reverify_design)
from .linmodel import (ParameterVector, PriorSet, SystemModel, Trajectory,
                       build_regressors, pack_theta, prior_contains, simulate,
                       system_from_theta, theta_bound, unpack_theta,
                       validate_true_system)
from .sdp import (ConicProgram, LmiBlock, Solution, SolverOptions,
                  find_strictly_feasible, hermitian_embed, solve, verify)
from .spectral import (FrequencyGrid, InputSpectrum, SpectralDecomposition,
                       TransferSample, decompose_spectrum, synth_multisine,
                       transfer_samples)

__version__ = "0.1.0"

__all__ = [
    "BoundConstants", "ConfidenceEllipsoid", "ConfigError", "ConicProgram",
    "DataError", "DecayEnvelope", "DesignResult", "DesignSpec",
    "DimensionError", "DomainError", "Excitation", "FrequencyGrid",
    "GridError", "InfeasibleError", "InputSpectrum", "LmiBlock",
    "NumericalError", "ParameterVector", "PriorSet", "ResolventError",
    "ResourceError", "RunConfig", "ScenarioConstants", "Solution",
    "SolverOptions", "SpectralDecomposition", "StabilityError",
    "SystemModel", "Trajectory", "TransferSample",
    "assemble_exploration_program", "build_regressors", "cmd_constants",
    "cmd_design", "cmd_sweep", "cmd_validate", "compute_bound_constants",
    "confidence_ellipsoid", "data_sufficient", "decompose_spectrum",
    "disturbance_gamma_w", "ellipsoid_contains", "excitation_lower_bound_check",
    "find_strictly_feasible", "fit_decay_envelope", "goal_satisfied",
    "hermitian_embed", "load_config", "pack_theta", "prior_contains",
    "radius_R", "reverify_design", "rls_estimate", "run_algorithm_1",
    "simulate", "solve", "solve_exploration_sdp", "synth_multisine",
    "system_from_theta", "theta_bound", "transfer_samples",
    "transient_gamma_u", "unpack_theta", "validate_true_system",
    "verify", "__version__",
]
