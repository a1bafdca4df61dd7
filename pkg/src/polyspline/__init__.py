"""Polyharmonic-spline regression derived from a scale-invariant Gaussian prior."""

from .errors import (
    ConditioningWarning,
    ConfigError,
    ConvergenceError,
    DimensionError,
    DomainError,
    ModelFormatError,
    PolysplineError,
    SingularMatrixError,
)
from .gram_solver import GramMatrix, SolveReport, assemble_gram, solve_coefficients
from .kernel import (
    EULER_GAMMA,
    BCMode,
    KernelParams,
    b_of_tau,
    c_of_tau,
    cin_integral,
    kernel_eval,
    make_kernel_params,
    spectral_density,
    suggest_omega0,
)
from .model import (
    FittedModel,
    TrainingSet,
    fit,
    load_model,
    predict,
    predict_batch,
    residuals,
    save_model,
)
from .spectral_lab import (
    Realization,
    SpectralConfig,
    beta_half,
    cross_section_ratio,
    empirical_variogram,
    finite_candidate_map,
    quadrature_covariance,
    sample_realization,
    sample_realizations,
)

__version__ = "0.1.0"
