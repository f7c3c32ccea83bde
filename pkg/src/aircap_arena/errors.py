"""Exception types shared across the package."""


class DegenerateGeometry(Exception):
    """Two-view triangulation cannot be solved (coincident centers, parallel rays, ill-conditioned system)."""


class OutOfBoundsAction(Exception):
    """Action component exceeds the configured velocity or yaw-rate bounds."""


class ConfigError(Exception):
    """Invalid or infeasible configuration."""


class VariantMismatch(Exception):
    """Inputs inconsistent with the requested network variant."""


class ShapeMismatch(Exception):
    """Array shape does not match the network parameterization."""


class LengthMismatch(Exception):
    """Sequence arguments have inconsistent lengths."""


class NonFiniteLoss(Exception):
    """A training loss became NaN or infinite; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CheckpointMismatch(Exception):
    """Checkpoint contents do not match the requested variant or format version."""
