"""Exception hierarchy shared by all submodules."""


class SOHBError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(SOHBError, ValueError):
    pass


class ProjectionError(SOHBError, ArithmeticError):
    """The argmax of ``A . J`` over SO(n) is not well defined."""


class NonUniqueProjection(ProjectionError):
    pass


class SingularProjection(ProjectionError):
    pass


class NoConvergence(SOHBError, RuntimeError):
    pass


class InternalMismatch(SOHBError, RuntimeError):
    """Two evaluation routes that must agree did not."""


class DegenerateESS(SOHBError, RuntimeError):
    """Importance weights collapsed onto too few samples."""
