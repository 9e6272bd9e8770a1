"""Exception types raised by the library."""


class CatenoidACError(Exception):
    """Base class for all library errors."""


class DomainError(CatenoidACError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class QuadratureError(CatenoidACError):
    """Adaptive quadrature could not reach the requested tolerance."""


class NumericalStabilityError(CatenoidACError):
    """A computation lost too much precision to be trusted."""


class NoConvergenceError(CatenoidACError):
    """An iterative solve did not converge.

    ``history`` carries whatever residual trace the solver recorded.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class DegenerateProblemError(CatenoidACError):
    """A boundary value problem has a nontrivial kernel."""


class NoCriticalCatenoidError(CatenoidACError):
    """No catenoid meeting the boundary orthogonally was found."""


class ResolutionError(CatenoidACError):
    """A grid is too coarse to resolve the transition layer."""


class GridError(CatenoidACError):
    """A boundary-fitted grid could not be constructed."""


class EmptyInterfaceError(CatenoidACError):
    """A field has no sign change, so it has no zero level set."""


class ConfigError(CatenoidACError, ValueError):
    """A run configuration failed validation."""
