"""Exception and warning types shared across the package."""


class ModcommError(Exception):
    """Base class for all package errors."""


class OutOfBounds(ModcommError, ValueError):
    pass


class TooSmall(ModcommError, ValueError):
    pass


class Disconnects(ModcommError, ValueError):
    pass


class WrongStatistics(ModcommError, TypeError):
    pass


class NotPSD(ModcommError, ValueError):
    pass


class InvalidState(ModcommError, ValueError):
    pass


class DimensionTooLarge(ModcommError, ValueError):
    pass


class ImaginaryResidual(ModcommError, ArithmeticError):
    pass


class OddParity(ModcommError, ValueError):
    pass


class TwirlTooLarge(ModcommError, ValueError):
    pass


class Gapless(ModcommError, ValueError):
    pass


class GaplessParameters(ModcommError, ValueError):
    pass


class UnreducedTerm(ModcommError, RuntimeError):
    """A commutator pair matched no reduction rule (geometry-coverage bug)."""


class ConservationViolated(ModcommError, RuntimeError):
    pass


class CutTooShallow(ModcommError, ValueError):
    pass


class ImplicationViolated(ModcommError, RuntimeError):
    """cmi vanished but J did not: a numerical inconsistency."""


class ClampDominated(UserWarning):
    """More than 10% of the covariance spectrum was clamped away from purity."""
