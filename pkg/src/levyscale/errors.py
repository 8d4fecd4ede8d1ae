"""Exception hierarchy.

Two families: ``ValidationError`` for bad input (CLI exit code 2) and
``NumericalError`` for failures of the numerics themselves (exit code 3).
"""


class LevyScaleError(Exception):
    """Base class for all package errors."""


class ValidationError(LevyScaleError, ValueError):
    """A model, configuration or argument is invalid."""


class DomainError(ValidationError):
    """Argument outside the domain of a function."""


class NumericalError(LevyScaleError, ArithmeticError):
    """A numerical procedure could not produce a certified answer."""


class PoleEvaluation(NumericalError):
    """Laplace exponent evaluated at (or too close to) one of its poles."""


class NonFiniteSpecialFunction(NumericalError):
    """A gamma/beta evaluation overflowed or returned a non-finite value."""


class BracketFailure(NumericalError):
    """No sign change inside a bracket that should contain a root."""


class MultiplicityDetected(NumericalError):
    """Two roots of the Cramer-Lundberg equation coincide numerically."""


class ComplexPoles(NumericalError):
    """Phase-type generator has eigenvalues with nonzero imaginary part."""


class DivisionNearZero(NumericalError):
    """A residue product divides by a factor that is numerically zero."""


class NoSignChange(NumericalError):
    """A defining function kept its sign up to the search horizon."""


class EmptyInterval(NumericalError):
    """Truncation bounds are too loose or inconsistent to give an interval."""


class Degenerate(NumericalError):
    """The impulse-control problem has no admissible stationary policy."""


class RunStrategySignal(UserWarning):
    """F attains its supremum at zero: take-the-money-and-run candidate."""
