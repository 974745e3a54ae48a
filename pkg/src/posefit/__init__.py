"""Pose registration of a known triangle mesh against one grayscale photo.

The pieces, bottom up: mesh and image I/O, an attribute rasterizer with
explicit shading, a lighting-invariant alignment loss built on pixel
covariances, the pose parameterization with its camera solve, a
Nelder-Mead minimizer, and experiment drivers behind a CLI.
"""

from .errors import (
    AnnotationError,
    ConfigError,
    EmptyPixelSetError,
    ImageFormatError,
    InfeasiblePoseError,
    LossConsistencyError,
    MeshFormatError,
    MeshValidationError,
    ObjectiveError,
    PosefitError,
    SingularChannelError,
)
from .imgio import load_gray, read_pgm, save_gray, write_pgm
from .loss import (
    LinearFit,
    PixelStats,
    accumulate_stats,
    best_linear_fit,
    clip_mask,
    correlation_loss_1d,
    full_pixel_set,
    invariant_loss,
    pose_loss,
)
from .mesh import (
    Mesh,
    ModelAnnotations,
    compute_vertex_normals,
    load_annotations,
    load_mesh,
    loads_mesh,
    save_annotations,
    save_mesh,
)
from .pose import (
    Pose,
    denormalize,
    from_vector,
    make_pose,
    normalize,
    perturb,
    pose_from_camera,
    pose_to_camera,
    psi_z,
    solve_orientation,
    to_vector,
)
from .render import (
    AttributeImage,
    Camera,
    GrayImage,
    Lighting,
    composite_over_background,
    render_attributes,
    shade_phong,
)
from .simplex import (
    OptimResult,
    SimplexConfig,
    minimize,
    minimize_with_restarts,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "AttributeImage",
    "Camera",
    "ConfigError",
    "EmptyPixelSetError",
    "GrayImage",
    "ImageFormatError",
    "InfeasiblePoseError",
    "Lighting",
    "LinearFit",
    "LossConsistencyError",
    "Mesh",
    "MeshFormatError",
    "MeshValidationError",
    "ModelAnnotations",
    "ObjectiveError",
    "OptimResult",
    "PixelStats",
    "Pose",
    "PosefitError",
    "SimplexConfig",
    "SingularChannelError",
    "accumulate_stats",
    "best_linear_fit",
    "clip_mask",
    "composite_over_background",
    "compute_vertex_normals",
    "correlation_loss_1d",
    "denormalize",
    "from_vector",
    "full_pixel_set",
    "invariant_loss",
    "load_annotations",
    "load_gray",
    "load_mesh",
    "loads_mesh",
    "make_pose",
    "minimize",
    "minimize_with_restarts",
    "normalize",
    "perturb",
    "pose_from_camera",
    "pose_loss",
    "pose_to_camera",
    "psi_z",
    "read_pgm",
    "render_attributes",
    "save_annotations",
    "save_gray",
    "save_mesh",
    "shade_phong",
    "solve_orientation",
    "to_vector",
    "__version__",
]
