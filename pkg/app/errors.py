"""
Exception hierarchy for the optimizer
Library code raises these; the CLI and the HTTP service translate them.
"""


class SobolOptError(Exception):
    """Base class for every error raised by the package"""


class DomainError(SobolOptError, ValueError):
    """A coordinate lies outside [-1, 1] (or outside the canonical box)"""


class BasisSizeError(SobolOptError):
    """(D+1)^d exceeds the configured basis size cap"""


class DimensionMismatchError(SobolOptError, ValueError):
    """Array shapes do not agree"""


class NonFiniteInputError(SobolOptError, ValueError):
    """NaN or infinity in solver input"""


class DegenerateSurrogateError(SobolOptError):
    """Sobol index requested for a surrogate with zero variance"""


class InvalidConstraintError(SobolOptError, ValueError):
    """Empty or out-of-range subset in a Sobol constraint"""


class DegenerateEstimateError(SobolOptError):
    """Monte-Carlo variance is not positive (constant objective)"""


class ObjectiveEvaluationError(SobolOptError):
    """The objective returned a non-finite value"""


class UnknownObjectiveError(SobolOptError, KeyError):
    """No objective registered under the requested id"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown objective"


class ConfigurationError(SobolOptError):
    """Invalid experiment spec file or command-line override"""
