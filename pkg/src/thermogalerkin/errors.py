"""Exception types raised across the package."""


class DomainError(ValueError):
    """A point or parameter lies outside the admissible domain."""


class ShapeError(ValueError):
    """Sampled fields do not live on the same grid."""


class DegenerateScalingError(ValueError):
    """Wall and free-stream temperatures coincide."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class NumericalError(RuntimeError):
    """A linear or eigenvalue solve failed."""


class BlowupError(NumericalError):
    """Non-finite values appeared in the modal coefficients.

    The partially integrated trajectory (up to the last finite state) is
    attached as ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
