"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3 and physics-regime errors (valid input, but the
requested quantity does not exist in that regime) with 4.
"""


class EitCoolError(Exception):
    """Base class for all package errors."""


class ConfigError(EitCoolError):
    """Invalid configuration file, schema violation or bad argument."""


class DimensionLimitError(ConfigError):
    """Requested state space exceeds the hard-coded desk-scale guard."""


class NumericalError(EitCoolError):
    """Numerical procedure failed (non-convergence, degeneracy, ...)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge within its iteration budget."""


class PhysicsRegimeError(EitCoolError):
    """The inputs are valid but lie in a regime where the request is undefined."""


class HeatingRegimeError(PhysicsRegimeError):
    """Blue-sideband rate exceeds red-sideband rate: no cooling steady state."""


class UnstableCrystalError(PhysicsRegimeError):
    """The ion configuration is not a stable linear crystal."""
