"""Exception types shared across the package."""


class BJJError(Exception):
    """Base class for all package errors."""


class DomainError(BJJError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class SingularityError(BJJError, ArithmeticError):
    """The imbalance reached |n| -> 1 and the equations of motion blew up."""


class IntegrationError(BJJError, RuntimeError):
    """The ODE solver failed (step-size underflow or similar)."""


class GuardBandError(DomainError):
    """Evaluation too close to the separatrix-crossing time of a damped
    self-trapped trajectory. Use :func:`bjj.analytic.evaluate_piecewise`."""


class DegeneracyError(DomainError):
    """A parameter conversion is singular for the given inputs."""


class ConfigError(BJJError, ValueError):
    """A run configuration is malformed or inconsistent."""
