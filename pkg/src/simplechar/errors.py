"""Exception types raised by the solver library.

Each exception carries an ``exit_code`` used by the command-line front end
to map failure classes onto process exit codes.
"""


class SimpleCharError(Exception):
    """Base class for library errors."""

    exit_code = 4


class ValidationError(SimpleCharError, ValueError):
    """Malformed input: bad config, bad polynomial text, shape mismatch."""

    exit_code = 2


class PolyParseError(ValidationError):
    """Polynomial text could not be parsed."""


class DegenerateLine(SimpleCharError):
    """Line restriction has a vanishing leading coefficient."""


class NearDoubleRoot(SimpleCharError):
    """Roots too close (or derivative too small) for partial fractions."""


class DirectionOnCharacteristicCone(SimpleCharError):
    """Direction with vanishing principal part."""

    exit_code = 3


class BudgetExhausted(SimpleCharError):
    """Greedy direction search ran out of candidates."""

    exit_code = 3


class DoubleCharacteristic(SimpleCharError):
    """Second-order symbol with a real double characteristic."""

    exit_code = 3


class UncertifiedDirections(SimpleCharError):
    """Direction set without a positive certification margin."""

    exit_code = 3


class NearParallel(SimpleCharError):
    """Two directions are too close to parallel."""


class BadSetLeakage(SimpleCharError):
    """Source frequency support reaches the excluded bad set."""


class DivisionOnZeroSet(SimpleCharError):
    """Fourier division attempted where the symbol is small."""


class NotNormal(SimpleCharError):
    """Matrix symbol fails the normality check."""


class StudyAssertion(SimpleCharError):
    """A study's pass/fail threshold was not met."""

    exit_code = 5
