"""Exception types shared across the package."""


class PdplError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PdplError, ValueError):
    """Bad input: malformed file, out-of-range value, unknown config key."""


class NumericalError(PdplError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class SingularCovarianceError(NumericalError):
    def __init__(self, message: str, combination=None, condition: float = float("inf")):
        super().__init__(message)
        self.combination = combination
        self.condition = condition
