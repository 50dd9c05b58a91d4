"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class for all errors raised by stochlv."""


class GridError(LabError, ValueError):
    """A time value does not fall on the path grid or a grid is malformed."""


class WindowError(LabError, ValueError):
    """A request needs noise outside the sampled window of a path."""


class DivergenceError(LabError, ArithmeticError):
    """An integration blew up (state norm above the divergence guard)."""


class ResolutionError(LabError, ArithmeticError):
    """Too many nonnegativity clamps: the step is too coarse for the problem."""


class DegenerateError(LabError, ValueError):
    """A formula is undefined for the given parameters (e.g. D = 0, sigma = 0)."""


class InsufficientDataError(LabError, ValueError):
    """Not enough samples, crossings or cycles to compute a statistic."""


class ConfigError(LabError, ValueError):
    """An experiment configuration failed schema validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class BudgetError(LabError, RuntimeError):
    """A numeric budget (steps, paths, memory) was exceeded."""
