"""Block-wise soft-detection GRAND decoding over channels with correlated noise."""

from .errors import ConfigError, NumericalError, ParameterError

__version__ = "0.1.0"

__all__ = ["ConfigError", "NumericalError", "ParameterError", "__version__"]
