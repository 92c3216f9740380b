"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`FateBandsError`; most of them are also ``ValueError`` so that callers
validating user input can catch them the usual way.
"""


class FateBandsError(Exception):
    """Base class for all package errors."""


class ValidationError(FateBandsError, ValueError):
    """Malformed input (shapes, non-finite values, bad grid)."""


class EmptyArmError(ValidationError):
    pass


class SingularDesignError(FateBandsError, ValueError):
    """The arm Gram matrix is rank deficient or too ill-conditioned."""


class InsufficientResidualDfError(FateBandsError, ValueError):
    pass


class GridMismatchError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class GridTooShortError(ValidationError):
    pass


class InvalidAlphaError(ValidationError):
    pass


class NoRootError(FateBandsError, ArithmeticError):
    """The threshold equation has no root inside the search bracket."""


class LengthMismatchError(ValidationError):
    pass


class NotPSDError(FateBandsError, ValueError):
    """A covariance matrix is too far from positive semi-definite."""


class SeparationError(FateBandsError, ArithmeticError):
    """Logistic fit diverging because one class is (quasi-)separated.

    The last iterate is kept on ``model`` so callers can still report it.
    """

    def __init__(self, message, model=None):
        super().__init__(message)
        self.model = model


class EmptyStratumError(ValidationError):
    pass


class DegenerateArmError(FateBandsError, RuntimeError):
    """Too many consecutive treatment draws left an arm unfittable."""


class DatasetError(ValidationError):
    """A data or config file could not be parsed."""
