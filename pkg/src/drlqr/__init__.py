"""Distributionally robust LQR for linear systems with multiplicative noise.

Data-driven moment ambiguity sets with high-probability radii, generalized
Riccati solvers, LMI-based robust synthesis, and mean-square stability
certification.
"""

from .ambiguity import (AmbiguityConfig, InsufficientDataError, MomentAmbiguity,
                        SampleSet, SampleSizeError, ambiguity_radii,
                        build_ambiguity, empirical_moments, load_samples_csv,
                        min_sample_size, save_samples_csv, t_mu, t_sigma)
from .drsynth import DrSynthesisError, SynthesisResult, synth_full, synth_rhc
from .experiment import (Example1Result, ExperimentConfig, RunRecord,
                         replicate_example1, run_sample_complexity,
                         sample_gaussian)
from .matcore import (DomainError, NumericalFailure, ShapeError, SymMatrix,
                      is_psd, psd_sqrt, symmetrize)
from .riccati import (Controller, NotStabilizableError, dr_covariance,
                      load_gain, nominal_sdp, save_controller, value_iteration)
from .stability import (ClosedLoop, InstabilityError, closed_loop_cost,
                        closed_loop_value_matrix, dr_certify_mss, is_mss,
                        lyapunov_P, second_moment_operator)
from .sysmodel import (CostWeights, DisturbanceMoments, MultNoiseSystem, fgh,
                       load_system, save_system)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityConfig", "ClosedLoop", "Controller", "CostWeights",
    "DisturbanceMoments", "DomainError", "DrSynthesisError", "Example1Result",
    "ExperimentConfig", "InstabilityError", "InsufficientDataError",
    "MomentAmbiguity", "MultNoiseSystem", "NotStabilizableError",
    "NumericalFailure", "RunRecord", "SampleSet", "SampleSizeError",
    "ShapeError", "SymMatrix", "SynthesisResult", "ambiguity_radii",
    "build_ambiguity", "closed_loop_cost", "closed_loop_value_matrix",
    "dr_certify_mss", "dr_covariance", "empirical_moments", "fgh", "is_mss",
    "is_psd", "load_gain", "load_samples_csv", "load_system", "lyapunov_P",
    "min_sample_size", "nominal_sdp", "psd_sqrt", "replicate_example1",
    "run_sample_complexity", "sample_gaussian", "save_controller",
    "save_samples_csv", "save_system", "second_moment_operator", "symmetrize",
    "synth_full", "synth_rhc", "t_mu", "t_sigma", "value_iteration",
]
