"""Exception hierarchy for the posefit package."""


class PosefitError(Exception):
    """Base class for all posefit errors."""


class MeshFormatError(PosefitError):
    """A mesh or annotation file could not be parsed."""


class MeshValidationError(PosefitError):
    """A parsed mesh violates a structural constraint."""


class AnnotationError(PosefitError):
    """Wheel or axle annotations are missing or inconsistent."""


class ImageFormatError(PosefitError):
    """An image file could not be parsed or written."""


class EmptyPixelSetError(PosefitError):
    """Background clipping produced no foreground pixels."""


class SingularChannelError(PosefitError):
    """A statistics channel is too degenerate for the requested fit."""


class LossConsistencyError(PosefitError):
    """Internal invariant of the loss computation was violated."""


class InfeasiblePoseError(PosefitError):
    """No camera realizes the requested pose parameters."""


class ObjectiveError(PosefitError):
    """The objective function returned a non-finite value."""


class ConfigError(PosefitError):
    """An experiment configuration value is invalid."""
