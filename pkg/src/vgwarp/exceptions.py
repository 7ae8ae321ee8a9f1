class VgwarpError(Exception):
    """Base class for errors raised by vgwarp."""


class DomainError(VgwarpError, ValueError):
    """Location outside the partitioned domain or otherwise ill-posed geometry."""


class ParameterError(VgwarpError, ValueError):
    """Invalid model or algorithm parameter."""


class NumericalError(VgwarpError, ArithmeticError):
    """A numerical procedure failed (non-PD covariance, non-convergence...)."""


class NotPositiveDefiniteError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """Optimizer did not converge. ``best`` holds the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateVariogramError(NumericalError):
    pass


class ConfigError(VgwarpError):
    pass


class DataError(VgwarpError):
    """Unreadable or unusable input data."""


class PipelineError(VgwarpError):
    """Stage failure in the end-to-end pipeline."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
