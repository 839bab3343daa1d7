"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced an invalid result."""


class ConfigurationError(ValueError):
    """A chain or experiment was configured with contradictory options."""


class SamplingError(RuntimeError):
    """A rejection sampler exhausted its retry budget."""
