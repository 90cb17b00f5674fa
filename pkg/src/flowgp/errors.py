"""Exception types raised across the package."""


class FlowGPError(Exception):
    """Base class for all package errors."""


class InputError(FlowGPError, ValueError):
    """Invalid arguments, shapes or configuration."""


class DivergenceError(FlowGPError, ArithmeticError):
    """A state became non-finite or exceeded the divergence threshold.

    ``step`` is the index of the step that failed, ``time`` the
    corresponding time and ``row`` the design row (flow-map datasets only).
    """

    def __init__(self, message, step=None, time=None, row=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.row = row


class ConditioningError(FlowGPError, ArithmeticError):
    """A Gram matrix could not be factorised even with the largest jitter."""


class DegeneracyError(FlowGPError, ArithmeticError):
    """The trend regression matrix is rank deficient."""


class FittingError(FlowGPError, RuntimeError):
    """Every start of the hyperparameter search failed."""


class EnsembleError(FlowGPError, RuntimeError):
    """All realisations of an ensemble diverged."""

    def __init__(self, message, n_diverged=None, failures=None):
        super().__init__(message)
        self.n_diverged = n_diverged
        self.failures = failures or []
