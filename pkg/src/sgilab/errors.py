"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid user input: bad durations, malformed scenario, inconsistent options."""


class FieldDomainError(ValueError):
    """Field evaluated at a point where the model is undefined (inside a wire)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""
