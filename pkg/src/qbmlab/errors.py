"""Exception hierarchy shared by all qbmlab modules."""


class QBMError(Exception):
    """Base class for every error raised by qbmlab."""


class InvalidSpecError(QBMError, ValueError):
    """A state or parameter specification violates its invariants."""


class InvalidTimeError(QBMError, ValueError):
    """Negative or otherwise unusable evolution time."""


class SingularTermError(QBMError, ArithmeticError):
    """A coefficient map hit a zero denominator (C = 0, a = 0, Z = 0, ...)."""


class UnsupportedStateError(QBMError, ValueError):
    """The operation is only defined for a narrower class of states."""


class NumericalInconsistencyError(QBMError, ArithmeticError):
    """A quantity that must be non-negative came out clearly negative."""


class ExtendGridError(QBMError, ValueError):
    """Grid extents do not cover the support or the characteristic footprint."""


class ResolutionError(QBMError, ValueError):
    """Grid spacing is too coarse for the represented function."""


class RefinementRequiredError(QBMError, ArithmeticError):
    """Integrator step error estimate exceeds its tolerance."""
