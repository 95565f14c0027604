"""Exception hierarchy.

The CLI maps ``InputError`` to exit status 2 and ``NumericalError`` to 3.
"""


class CoarseLabError(Exception):
    pass


class InputError(CoarseLabError, ValueError):
    """Malformed or inconsistent input data."""


class SpaceMismatchError(InputError):
    pass


class UnknownPointError(InputError, KeyError):
    def __str__(self):
        # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class SchemaError(InputError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class ConfigError(InputError):
    pass


class PreconditionError(InputError):
    """An operation was called outside the regime its contract covers."""


class DegenerateVectorError(PreconditionError):
    """A vector that must be normalised turned out to be zero."""


class NumericalError(CoarseLabError, ArithmeticError):
    pass


class NotPSDError(NumericalError):
    def __init__(self, min_eigenvalue: float, tol: float):
        self.min_eigenvalue = min_eigenvalue
        self.tol = tol
        super().__init__(f"kernel is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e} < -{tol:.3e}")


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class WitnessViolation(CoarseLabError):
    """A witness fails one of its defining inequalities.

    ``where`` is the offending point id or pair of ids; ``value`` the measured
    quantity (ratio, norm, ...).
    """

    def __init__(self, message: str, where=None, value: float | None = None):
        self.where = where
        self.value = value
        super().__init__(message)
