"""
Exception types for the lens-assisted Rydberg receiver simulator.
"""


class ProbeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ProbeError, ValueError):
    """Invalid or unreadable experiment configuration."""


class GeometryError(ProbeError, ValueError):
    """Lens, array or grid geometry violates a required invariant."""


class DictionaryError(ProbeError):
    """Degenerate power dictionary or a cache file that does not match."""


class ScenarioError(ProbeError):
    """A user scenario could not be drawn within the rejection cap."""


class DegenerateResidualError(ProbeError):
    """The SIC residual has been exhausted and carries no direction."""
