"""Exception types shared across the package.

Domain errors on scalar arguments (a <= 0, p-order on empty data, ...) use
plain ValueError; the classes here mark structural or runtime failures that
callers may want to catch specifically.
"""


class HsymError(Exception):
    """Base class for package-specific failures."""


class WindowError(HsymError, ValueError):
    """A shell window is malformed or incompatible with the operation."""


class ConfigError(HsymError, ValueError):
    """A run configuration file or value is invalid."""


class FormatError(HsymError, ValueError):
    """A binary trajectory/checkpoint file has a bad magic, version or size."""


class BlowUpError(HsymError, ArithmeticError):
    """Integration aborted: an amplitude exceeded the blow-up threshold."""

    def __init__(self, t: float, max_abs: float):
        self.t = t
        self.max_abs = max_abs
        super().__init__(f"blow-up at t={t:.6g}: max|u|={max_abs:.3e}")


class ConvergenceError(HsymError, ArithmeticError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message: str, last_estimate: float | None = None):
        self.last_estimate = last_estimate
        super().__init__(message)
