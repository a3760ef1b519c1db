"""Exception types raised by the solvers and the harness."""


class RadtransError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RadtransError, ValueError):
    pass


class SingularSystemError(RadtransError):
    """A pivot (or pivot block) vanished during elimination.

    ``index`` is the row (scalar systems) or spatial block index.
    """

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"singular system at index {self.index}")


class NonConvergenceError(RadtransError):
    """An iteration hit its cap; ``residual`` is the last residual/increment norm."""

    def __init__(self, residual, message=None, index=None):
        self.residual = float(residual)
        self.index = index
        where = "" if index is None else f" (cell {index})"
        super().__init__(message or f"iteration did not converge{where}; last residual {self.residual:.3e}")


class InstabilityError(RadtransError):
    pass


class ConfigError(RadtransError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class SolverError(RadtransError):
    """Wraps a solver failure with the step index and time at which it happened."""

    def __init__(self, step, t, cause):
        self.step = step
        self.t = t
        self.cause = cause
        super().__init__(f"solver failed at step {step} (t={t:.6g}): {cause}")
