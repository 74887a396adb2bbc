"""Exception hierarchy.

Two families matter to callers: :class:`InputError` for malformed problems,
policies and files, and :class:`AnalysisRefusal` for analyses that are not
defined on a valid input (for example a derivative of a step function).
"""


class NewcomblikeError(Exception):
    """Base class for every error raised by this package."""


class InputError(NewcomblikeError, ValueError):
    """The caller supplied something malformed."""


class InvalidPolicy(InputError):
    """A vector is not within tolerance of the probability simplex."""


class ProblemFormatError(InputError):
    """A problem file or dependence spec could not be parsed."""


class UnknownFixture(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class AnalysisRefusal(NewcomblikeError):
    """The requested quantity is undefined or unavailable for this input."""


class RangeViolation(AnalysisRefusal):
    """A dependence function left the simplex."""


class NotDifferentiable(AnalysisRefusal):
    def __init__(self, message="derivative unavailable"):
        super().__init__(message)


class TerminationError(AnalysisRefusal):
    """The process does not terminate almost surely under some policy."""


class CapExceeded(AnalysisRefusal):
    """An enumeration would exceed its configured size cap."""


class RewriteFailed(AnalysisRefusal):
    """No nonnegative representation was found below the degree cap."""


class NotASimplexMap(AnalysisRefusal):
    """Polynomial coefficients cannot come from a simplex-valued sampler."""


class SamplerMismatch(AnalysisRefusal):
    """A sampler does not reproduce the dependence function it stands for."""


class BeliefsUnavailable(AnalysisRefusal):
    """No belief construction applies at this policy."""


class AnchorMismatch(AnalysisRefusal):
    """Beliefs were built at a different policy than the one queried."""


class StepCapExceeded(AnalysisRefusal):
    """A rollout ran past its step cap."""
