"""Exception hierarchy shared by every module in the package."""


class ClapError(Exception):
    """Base class for all errors raised by clap_estimate."""


class LogDomainError(ClapError, ValueError):
    """Matrix has no real principal logarithm (negative real eigenvalue or singular)."""


class DegenerateHomography(ClapError, ValueError):
    pass


class DegenerateConfiguration(ClapError, ValueError):
    """Minimal-solver input does not determine a unique transform."""


class EmptyPointSet(ClapError, ValueError):
    pass


class TooFewObservations(ClapError, ValueError):
    pass


class InsufficientValidCandidates(ClapError, RuntimeError):
    pass


class EmptyAfterFilter(ClapError, RuntimeError):
    """Local filtering left no candidate; callers fall back to global mode."""


class DegenerateRotationMean(ClapError, ValueError):
    pass


class NonConvergence(ClapError, RuntimeError):
    pass


class NoValidHypothesis(ClapError, RuntimeError):
    pass


class AllCandidatesDegenerate(ClapError, RuntimeError):
    pass


class DimensionMismatch(ClapError, ValueError):
    pass
