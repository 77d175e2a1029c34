"""Exception hierarchy shared by the library and the command line front end."""


class MarketError(Exception):
    """Base class for every error raised by qmarket."""


class ValidationError(MarketError, ValueError):
    """An input violates a model invariant."""


class SymmetryViolation(ValidationError):
    pass


class DiagonalCoupling(ValidationError):
    pass


class NonpositiveFrequency(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class StateNotInSector(ValidationError):
    pass


class ParseError(MarketError, ValueError):
    """Malformed input document; ``where`` names the line or field."""

    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{where}: {message}"
        super().__init__(message)


class PerturbationError(MarketError, ValueError):
    """A perturbative formula was asked for outside its domain."""


class BasisTooLarge(MarketError):
    pass
