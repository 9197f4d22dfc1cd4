"""Exception types shared across the package."""

from __future__ import annotations


class InvalidArgument(ValueError):
    pass


class NumericalOverflow(FloatingPointError):
    pass


class DegenerateSmoothness(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


class ParseError(ValueError):
    """Malformed LIBSVM input. ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DatasetNotFound(FileNotFoundError):
    pass


class ConfigError(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


class DivergenceError(RuntimeError):
    """A non-finite estimator or iterate appeared at ``iteration``."""

    def __init__(self, iteration: int, what: str = "iterate"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration
        self.what = what
