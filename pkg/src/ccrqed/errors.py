"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class UnsupportedConfigurationError(ValueError):
    """The requested combination has no closed-form expression."""


class IntegrationError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DataError(ValueError):
    """Malformed or inconsistent experimental data."""
