"""Exception hierarchy shared by the library and the command line."""


class NSExtremesError(Exception):
    """Base class for all library errors."""


class DomainError(NSExtremesError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ContractError(NSExtremesError, ValueError):
    """Caller violated a precondition (shapes, lengths, feasibility)."""


class NumericError(NSExtremesError, ArithmeticError):
    """A linear solve, factorisation or inversion failed numerically."""
