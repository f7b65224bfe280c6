"""Exception hierarchy shared across the package."""


class SolhierError(Exception):
    """Base class for all package errors."""


class StructuralError(SolhierError, ValueError):
    """Shapes or algebra descriptors do not match."""


class ConfigurationError(SolhierError, ValueError):
    """An algebra, decomposition or hierarchy is configured inconsistently."""


class DomainError(SolhierError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedOperationError(SolhierError, NotImplementedError):
    """The operation is not available for this algebra or family."""


class ResourceError(SolhierError, RuntimeError):
    """A configured size limit (e.g. maximal band width) was exceeded."""


class FlatnessError(SolhierError, ValueError):
    """A connection form is not flat to the requested tolerance."""

    def __init__(self, message, curvature_norm):
        super().__init__(message)
        self.curvature_norm = curvature_norm


class IntegrationError(SolhierError, RuntimeError):
    """Time integration was aborted; carries the last accepted state."""

    def __init__(self, message, last_state=None, last_time=None):
        super().__init__(message)
        self.last_state = last_state
        self.last_time = last_time


class FactorizationError(SolhierError, RuntimeError):
    """Birkhoff factorization failed to converge at some node."""

    def __init__(self, message, node=None, residual=None):
        super().__init__(message)
        self.node = node
        self.residual = residual


class SingularityError(SolhierError, ZeroDivisionError):
    """A quotient formula hit a vanishing denominator."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node
