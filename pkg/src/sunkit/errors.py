"""Exception classes raised across sunkit."""


class SunkitError(Exception):
    """Base class for every library error."""


class ValidationError(SunkitError, ValueError):
    """Parameters violate a structural or positivity constraint."""


class DimensionMismatch(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class UnitDiagonalViolation(ValidationError):
    pass


class NonPositiveScale(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class NotMonomial(ValidationError):
    pass


class Singular(ValidationError):
    pass


class ZeroBeta(ValidationError):
    pass


class NotDiagonal(ValidationError):
    pass


class NotOrdered(ValidationError):
    pass


class ConvergenceFailure(SunkitError, ArithmeticError):
    pass


class Underflow(SunkitError, ArithmeticError):
    """An orthant probability fell below the representable floor (1e-300)."""


class TooLarge(SunkitError):
    pass


class LowAcceptance(SunkitError):
    def __init__(self, message, expected_rate=None):
        super().__init__(message)
        self.expected_rate = expected_rate


class ProposalBudgetExhausted(SunkitError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ParseError(SunkitError, ValueError):
    pass
