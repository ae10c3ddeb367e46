"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Vector operands have incompatible lengths."""


class NumericalError(ArithmeticError):
    """A kernel produced or received a non-finite or degenerate value."""


class DivergenceError(NumericalError):
    """A solver hit a non-finite value or gradient.

    The partial trace collected so far is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class ConfigError(ValueError):
    """An experiment or solver configuration is invalid."""
