"""Exception types shared across the package."""


class TorusLabError(Exception):
    """Base class for all package errors."""


class ConfigError(TorusLabError):
    """Invalid configuration or input file. Carries an optional field name."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class StiffRegionError(TorusLabError):
    """Step-size underflow during integration; carries the arc length reached."""

    def __init__(self, message, s_reached=None):
        super().__init__(message)
        self.s_reached = s_reached


class NonFiniteStateError(TorusLabError):
    """Integration produced NaN or Inf, usually from a bad metric input."""


class TargetOverflowError(TorusLabError):
    """Lattice-translate enumeration exceeded the configured target cap."""

    def __init__(self, message, estimated_count=None, cap=None):
        super().__init__(message)
        self.estimated_count = estimated_count
        self.cap = cap


class ShootingError(TorusLabError):
    """A two-point shooting problem failed in a way that is not a plain miss."""


class CurveShorteningError(TorusLabError):
    """Curve shortening failed to converge; carries the last iterate."""

    def __init__(self, message, last_nodes=None, sweeps=None):
        super().__init__(message)
        self.last_nodes = last_nodes
        self.sweeps = sweeps
