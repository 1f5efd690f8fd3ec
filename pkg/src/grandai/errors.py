"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the domain an operation accepts."""


class NumericalError(ArithmeticError):
    """A matrix is too ill-conditioned to factor reliably."""


class ConfigError(ValueError):
    """A simulation config failed validation.

    ``path`` is the dotted field path of the offending entry.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
