"""Exception hierarchy.

Every exception carries a short ``code`` that the command line front end
prints as a machine-greppable prefix, and an ``exit_status``.
"""


class PolysplineError(Exception):
    code = "E_CONFIG"
    exit_status = 2


class DomainError(PolysplineError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    code = "E_CONFIG"


class ConfigError(PolysplineError, ValueError):
    """Invalid configuration (spectral grid, CLI flags, curve ranges)."""

    code = "E_CONFIG"


class DimensionError(PolysplineError, ValueError):
    """Input vectors do not have the expected dimension or count."""

    code = "E_DIM"


class ModelFormatError(PolysplineError, ValueError):
    """Model or dataset file is malformed, truncated or inconsistent."""

    code = "E_FORMAT"


class SingularMatrixError(PolysplineError, ArithmeticError):
    """The regularized Gram system is numerically singular."""

    code = "E_SINGULAR"
    exit_status = 3


class ConvergenceError(PolysplineError, ArithmeticError):
    """Adaptive quadrature could not meet its error target."""

    code = "E_CONVERGENCE"
    exit_status = 3


class ConditioningWarning(UserWarning):
    """Emitted when the condition estimate of K + sigma2*E exceeds the threshold."""
