"""Exception types raised across the package."""


class ResolutionError(ValueError):
    """Grid resolution too small for the requested operation."""


class GevreyOverflowError(OverflowError):
    """A Gevrey exponent exceeded the log-domain cap."""


class NotInClassError(GevreyOverflowError):
    """Coefficient field cannot be certified at the requested Gevrey radius."""


class DivergedError(ArithmeticError):
    """Time integration produced non-finite values."""


class ZeroFieldError(ValueError):
    """Operation undefined on an identically zero field."""


class SolverFault(RuntimeError):
    """Solution norm collapsed to zero from nonzero data."""


class EffectiveVanishingError(ArithmeticError):
    """Local L2 mass below representable range."""


class ConfigError(ValueError):
    """Invalid experiment or solver configuration."""


class SweepPointError(RuntimeError):
    """A failure inside one sweep point, tagged with its (t, seed)."""

    def __init__(self, t: float, seed: int, cause: Exception):
        super().__init__(f"t={t:.6g}, seed={seed}: {type(cause).__name__}: {cause}")
        self.t = t
        self.seed = seed
        self.cause = cause
