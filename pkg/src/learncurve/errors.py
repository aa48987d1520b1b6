"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InsufficientDataError(ValueError):
    """Too few cases to identify the model parameters."""


class NumericalError(ArithmeticError):
    """A linear-algebra or floating-point failure during estimation.

    ``condition`` carries the condition-number estimate when one is available.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
