"""Exception types raised across the package."""


class DtnHomogError(Exception):
    """Base class for all package errors."""


class NonPositiveDimension(DtnHomogError, ValueError):
    pass


class TooCoarse(DtnHomogError, ValueError):
    pass


class BoundaryNode(DtnHomogError, IndexError):
    pass


class NonSymmetricInput(DtnHomogError, ValueError):
    pass


class NotConverged(DtnHomogError, RuntimeError):
    """Raised by callers that require a converged solve.

    The solver itself returns a result with ``converged=False``; helpers that
    build on it (DtN evaluation, sweeps) raise this with the result attached.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NotLinear(DtnHomogError, TypeError):
    pass


class BumpDoesNotFit(DtnHomogError, ValueError):
    pass


class NonUnitNormal(DtnHomogError, ValueError):
    pass


class NoneFoundInWindow(DtnHomogError, LookupError):
    pass


class IncompatibleEpsilon(DtnHomogError, ValueError):
    pass
