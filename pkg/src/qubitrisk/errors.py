"""Exception hierarchy shared by all modules."""


class QubitRiskError(Exception):
    """Base class for errors raised by this package."""


class DomainError(QubitRiskError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class DirectionUndefined(DomainError):
    """A Bloch vector of zero length has no direction."""


class Singular(QubitRiskError, ArithmeticError):
    """A matrix would be singular (e.g. information matrix at a pure state)."""


class DimensionCap(QubitRiskError):
    """Requested dense matrix exceeds the configured dimension cap."""


class CutoffTooSmall(QubitRiskError):
    """Fock-space truncation discards too much probability mass.

    Attributes
    ----------
    trace : float
        Trace of the truncated matrix.
    suggested : int
        A cutoff that is large enough for the requested state.
    """

    def __init__(self, message, trace=None, suggested=None):
        super().__init__(message)
        self.trace = trace
        self.suggested = suggested
