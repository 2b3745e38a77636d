"""Exception hierarchy shared by the solver, spectral and verification layers."""


class HyperlabError(Exception):
    """Base class for all errors raised by hyperlab."""


class DomainError(HyperlabError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class RangeError(HyperlabError, ValueError):
    """Evaluation point outside the sampled range of a profile."""


class NumericalDegeneracyError(HyperlabError, ArithmeticError):
    """A denominator or pivot collapsed where the theory says it cannot."""


class ConfigurationError(HyperlabError, ValueError):
    """Inconsistent or missing configuration."""


class InadmissibleParams(ConfigurationError):
    """Parameters violate the admissibility conditions for existence.

    ``reason`` names the inequality that failed.
    """

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class StiffnessError(HyperlabError, RuntimeError):
    """Adaptive step size underflowed."""


class IndeterminateError(HyperlabError, RuntimeError):
    """Trajectory tail fits neither decay rate; a longer horizon is needed."""


class BracketError(HyperlabError, RuntimeError):
    """No sign change of the shooting classification in the amplitude scan."""


class RadiusError(HyperlabError, RuntimeError):
    """No amplitude places the first zero at the requested ball radius."""


class ResolutionError(HyperlabError, ValueError):
    """Grid too coarse for the requested discretization."""


class SizeError(HyperlabError, ValueError):
    """Requested more eigenvalues than the matrix has."""


class DegeneracyError(HyperlabError, RuntimeError):
    """Eigenvalue is (numerically) multiple, or inverse iteration stalled."""
