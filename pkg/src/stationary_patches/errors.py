"""Exception hierarchy shared by every module of the package."""


class PatchError(Exception):
    """Base class for all errors raised by :mod:`stationary_patches`."""


class DomainError(PatchError, ValueError):
    """Input outside the domain where a quantity is defined (poles, collisions,
    divergent series, curves that stop being graphs over the circle)."""


class PreconditionError(PatchError, ValueError):
    """A documented precondition of an operation was violated by the caller."""


class AccuracyError(PatchError, ArithmeticError):
    """A quadrature or series did not reach its accuracy target."""


class InvariantFailure(PatchError):
    """A mathematical property that must hold was observed to fail.

    Raised, for instance, when the bifurcation scan finds no sign change or
    more than one, or when the transversality sign pattern is violated.
    """


class InconsistencyError(InvariantFailure):
    """An internal quantity that is provably nonnegative came out negative."""


class NonConvergence(PatchError):
    """An iterative solver exhausted its budget.

    Attributes
    ----------
    residual : float
        Residual at the last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
