"""Exception hierarchy for levykernel."""


class LevyKernelError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMeasure(LevyKernelError, ValueError):
    """A Levy measure or triplet failed validation."""


class ConfigError(LevyKernelError, ValueError):
    """A model configuration could not be parsed.

    ``key`` holds the dotted path of the offending entry.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class QuadratureFailure(LevyKernelError, ArithmeticError):
    def __init__(self, message, achieved_error=None):
        self.achieved_error = achieved_error
        super().__init__(message)


class SingularIntegrand(LevyKernelError, ValueError):
    pass


class GridCoverage(LevyKernelError, ValueError):
    """A grid is too small for the mass it has to hold.

    ``required_extent`` is the half-width the grid would need.
    """

    def __init__(self, message, required_extent=None):
        self.required_extent = required_extent
        super().__init__(message)


class ScaleUnreachable(LevyKernelError, ArithmeticError):
    pass


class InsufficientDecay(LevyKernelError, ValueError):
    def __init__(self, message, boundary_magnitude=None):
        self.boundary_magnitude = boundary_magnitude
        super().__init__(message)


class ModelRejected(LevyKernelError, ValueError):
    """Operation refused because the model does not meet its precondition."""
