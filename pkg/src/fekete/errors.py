"""Exception types shared across the package."""


class FeketeError(Exception):
    """Base class for package-specific failures."""


class CapacityError(FeketeError):
    """A guarded combinatorial routine was asked to exceed its size cap."""


class ConditioningError(FeketeError):
    """A factorization pivot ratio fell below the accepted threshold.

    Carries the offending ratio so callers can report it.
    """

    def __init__(self, message, pivot_ratio=None):
        super().__init__(message)
        self.pivot_ratio = pivot_ratio


class NumericsError(FeketeError):
    """A computed quantity violated a numerical sanity bound."""


class SolverFailure(FeketeError):
    """The conic solver terminated without a usable solution.

    Carries the SolverResult for diagnostics.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
