"""Exception types shared by the library and the command line."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class NumericalError(RuntimeError):
    """A solver failed: divergence, singular system or non-finite iterate."""
