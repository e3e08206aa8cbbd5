"""Exception types raised by the solver."""


class TreeSizeError(MemoryError):
    """A tree level would exceed the configured node cap."""


class DegenerateInputError(ValueError):
    """Input data carries no information (all-zero snapshots, zero reference norm...)."""


class DivergenceError(ArithmeticError):
    """A numerical integration blew up."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``path`` names the offending field, e.g. ``"discretization.dt"``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
