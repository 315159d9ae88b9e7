"""Exception hierarchy shared by every module."""


class MvchebError(Exception):
    """Base class for all library errors."""


class InvalidInput(MvchebError, ValueError):
    pass


class InvalidSpec(InvalidInput):
    """A sampler specification with undefined or inconsistent moments."""


class NoConvergence(MvchebError, ArithmeticError):
    pass


class SingularBlock(MvchebError, ArithmeticError):
    """The conditioning block of a covariance matrix is not positive definite."""


class DegenerateModel(MvchebError, ValueError):
    """Every eigenvalue of the covariance sits at or below the rank tolerance."""
