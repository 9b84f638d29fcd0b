"""Exception hierarchy shared by all modules."""


class RoughMLEError(Exception):
    """Base class for every error raised by roughmle."""


class InvalidArgumentError(RoughMLEError, ValueError):
    pass


class IncompatiblePathsError(RoughMLEError, ValueError):
    """Paths or inputs that do not share a grid or a dimension."""


class InvalidModelError(RoughMLEError, ValueError):
    pass


class UnsupportedError(RoughMLEError, ValueError):
    """Valid input that the operation does not handle (e.g. d != 2 for areas)."""


class SingularInformationError(RoughMLEError, ArithmeticError):
    """The information form is not invertible.

    For drift estimation this happens exactly when ``span{h(X_t)}`` is a
    proper subspace of R^d, so the path carries no information about part
    of the drift matrix.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NumericalDomainError(RoughMLEError, FloatingPointError):
    pass


class ConfigError(RoughMLEError, ValueError):
    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
