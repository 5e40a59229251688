"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """A field does not have the shape of the grid it is used with."""


class NumericalFailure(RuntimeError):
    """A solve or time step produced an unusable result.

    ``t`` is the simulation time at which the failure happened (if known)
    and ``trace`` the partial trace recorded up to that point.
    """

    def __init__(self, message, t=None, trace=None):
        super().__init__(message)
        self.t = t
        self.trace = trace


class PreconditionError(ValueError):
    """A diagnostic was asked to run on data outside its hypotheses."""
