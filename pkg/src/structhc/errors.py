"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A construction or model configuration is invalid or infeasible."""


class ResourceGuardError(RuntimeError):
    """A request would exceed a configured cost limit."""
