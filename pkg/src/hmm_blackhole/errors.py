"""Exception hierarchy.

The CLI maps the three base classes to exit codes: ``ModelError`` (bad input,
exit 2), ``GuardError`` (computation guard, exit 3) and ``RegimeViolation``
(parameters outside the regime an operation is defined for, exit 4).
"""


class ModelError(ValueError):
    """Invalid model or parameter input."""


class NotIrreducible(ModelError):
    pass


class SymbolOutOfRange(ModelError):
    pass


class ZeroProbabilitySymbol(ModelError):
    pass


class NegativeState(ModelError):
    pass


class DomainError(ModelError):
    pass


class OrderMismatch(ModelError):
    """Jets of different truncation orders were combined."""


class DivisionByZeroConstantTerm(ArithmeticError):
    pass


class NonpositiveConstantTerm(ArithmeticError):
    pass


class GuardError(RuntimeError):
    pass


class EnumerationTooLarge(GuardError):
    pass


class QuadratureTooCoarse(GuardError):
    pass


class OverflowGuard(GuardError):
    pass


class RegimeViolation(ValueError):
    pass


class NotABlackHole(RegimeViolation):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotNonOverlapping(RegimeViolation):
    pass


class NotRankOne(RegimeViolation):
    pass
