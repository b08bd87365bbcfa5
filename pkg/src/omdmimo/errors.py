"""Exception and warning types raised across the package."""


class OmdError(Exception):
    """Base class for errors raised by :mod:`omdmimo`."""


class NonPositiveDefinite(OmdError, ValueError):
    """A matrix that must be positive definite has a non-positive pivot."""


class DimensionMismatch(OmdError, ValueError):
    """Matrix operands do not conform."""


class InfeasibleCovariance(OmdError, ValueError):
    """A transmit covariance violates the PSD or trace-power constraint."""


class BisectionFailed(OmdError, RuntimeError):
    """The dual subgradient does not bracket zero on [0, 1]."""


class OrderNotFound(OmdError, RuntimeError):
    """No successive group decoding order supports the rate point."""


class ConfigError(OmdError, ValueError):
    """Invalid scenario configuration or problem instance."""


class MaxIterExceeded(RuntimeWarning):
    """An iterative solver stopped at its iteration cap; best iterate returned."""
