"""Exception hierarchy shared by every uclab module."""


class UclabError(Exception):
    """Base class for all library errors."""


class ArgumentError(UclabError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ConfigurationError(ArgumentError):
    """A problem or experiment configuration violates a precondition."""


class UnsupportedSettingError(UclabError):
    """The operation is not defined for this curvature regime (e.g. mu = 0)."""


class CapacityError(UclabError):
    """A grid or net would exceed the configured point budget."""

    def __init__(self, required, cap):
        self.required = required
        self.cap = cap
        super().__init__(f"grid requires Q={required} points, exceeding the cap of {cap}")


class ConvergenceError(UclabError):
    """An iterative solver exhausted its budget before certifying its answer."""

    def __init__(self, message, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")


class ReplicateError(UclabError):
    """A solver failure inside one Monte Carlo replicate, tagged with its coordinates."""

    def __init__(self, n, replicate, cause):
        self.n = n
        self.replicate = replicate
        self.cause = cause
        super().__init__(f"n={n}, replicate={replicate}: {type(cause).__name__}: {cause}")
