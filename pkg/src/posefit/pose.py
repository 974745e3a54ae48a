"""Image-space pose parameters and their realization as a camera.

A pose fixes six numbers (seven in perspective mode):

* mu: pixel position of the visible rear wheel center,
* delta: pixel vector from there to the front wheel center,
* psi_xy: first two components of the unit axle direction in camera
  coordinates; the z component is the nonpositive root
  psi_z = -sqrt(1 - psi_x^2 - psi_y^2), so the axle always points away
  from the viewer and the annotated wheel is the near one,
* focal: focal length in pixels, perspective mode only.

``pose_to_camera`` builds the unique camera (up to the documented
smallest-angle tie break) that realizes a pose: the rotation is the
minimal rotation taking the model axle onto the target axle direction,
composed with a spin by gamma about that direction; gamma and the
scale (parallel) or rear wheel depth (perspective) follow from
requiring the projected wheelbase to equal delta.  The spin enters the
projected wheelbase through an expression of the form
A cos(gamma) + B sin(gamma) + C, so the candidate angles are solved in
closed form and validated; when two spins work the smaller angle in
[0, 2*pi) is chosen.

Normalized coordinates divide pixel quantities by the image width or
height; axle components are already dimensionless.  Perturbations and
recovery thresholds are expressed in these units.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePoseError
from .mesh import ModelAnnotations
from .render import Camera

# Optimizer-side clamps for proposals that leave the feasible region.
PSI_CLAMP_NORM = 1.0 - 1e-9
MIN_FOCAL_NORM = 1e-3
# Rear wheel depth in wheelbase lengths for parallel cameras, where the
# projection does not constrain depth.
PARALLEL_DEPTH_FACTOR = 10.0
# Minimum admissible rear wheel depth in perspective mode.
NEAR_DEPTH = 1e-6
# Projected wheelbases shorter than this fraction of the model
# wheelbase are rotation round-off, not genuine foreshortening.
MIN_PROJECTED_WHEELBASE = 1e-9


def psi_z(psi_xy) -> float:
    """Nonpositive z component completing the unit axle direction."""
    x, y = float(psi_xy[0]), float(psi_xy[1])
    rad = 1.0 - x * x - y * y
    if rad < 0.0:
        raise InfeasiblePoseError(
            f"axle direction ({x:.6g}, {y:.6g}) lies outside the unit disc"
        )
    return -math.sqrt(rad)


@dataclass
class Pose:
    """Image-space pose parameters. See the module docstring."""

    mu: np.ndarray  # (2,) pixels
    delta: np.ndarray  # (2,) pixels
    psi_xy: np.ndarray  # (2,)
    focal: float | None = None

    def validate(self) -> None:
        if float(self.psi_xy[0]) ** 2 + float(self.psi_xy[1]) ** 2 > 1.0:
            raise InfeasiblePoseError("axle direction outside the unit disc")
        if float(np.hypot(self.delta[0], self.delta[1])) <= 0.0:
            raise InfeasiblePoseError("wheelbase displacement has zero length")
        if self.focal is not None and not self.focal > 0.0:
            raise InfeasiblePoseError("focal length must be positive")

    def axle_direction(self) -> np.ndarray:
        return np.array(
            [float(self.psi_xy[0]), float(self.psi_xy[1]), psi_z(self.psi_xy)]
        )


def make_pose(mu, delta, psi_xy, focal: float | None = None) -> Pose:
    return Pose(
        mu=np.asarray(mu, dtype=np.float64),
        delta=np.asarray(delta, dtype=np.float64),
        psi_xy=np.asarray(psi_xy, dtype=np.float64),
        focal=focal,
    )


def normalize(pose: Pose, width: int, height: int) -> np.ndarray:
    """Pose as a dimensionless vector (length 6, or 7 with focal)."""
    parts = [
        pose.mu[0] / width,
        pose.mu[1] / height,
        pose.delta[0] / width,
        pose.delta[1] / height,
        pose.psi_xy[0],
        pose.psi_xy[1],
    ]
    if pose.focal is not None:
        parts.append(pose.focal / width)
    return np.array(parts, dtype=np.float64)


def denormalize(vec: np.ndarray, width: int, height: int) -> Pose:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape not in ((6,), (7,)):
        raise ValueError(f"pose vector must have 6 or 7 entries, got {vec.shape}")
    return Pose(
        mu=np.array([vec[0] * width, vec[1] * height]),
        delta=np.array([vec[2] * width, vec[3] * height]),
        psi_xy=vec[4:6].copy(),
        focal=float(vec[6] * width) if len(vec) == 7 else None,
    )


def from_vector(
    vec: np.ndarray, width: int, height: int, clamp: bool = False
) -> Pose:
    """Normalized vector to Pose, optionally clamping infeasible proposals.

    With clamp set, an axle pair outside the unit disc is pulled
    radially just inside it and a nonpositive focal proposal is raised
    to a small positive floor, so derivative-free search may wander
    freely.
    """
    vec = np.asarray(vec, dtype=np.float64)
    if clamp:
        vec = vec.copy()
        norm = math.hypot(vec[4], vec[5])
        if norm > PSI_CLAMP_NORM:
            vec[4] *= PSI_CLAMP_NORM / norm
            vec[5] *= PSI_CLAMP_NORM / norm
        if len(vec) == 7 and vec[6] < MIN_FOCAL_NORM:
            vec[6] = MIN_FOCAL_NORM
    return denormalize(vec, width, height)


def to_vector(pose: Pose, width: int, height: int) -> np.ndarray:
    return normalize(pose, width, height)


def perturb(
    pose: Pose, band_percent: float, seed, width: int, height: int
) -> Pose:
    """Displace every normalized component into a half-open band.

    Each component moves by a magnitude drawn uniformly from
    (band/2, band] percent of the normalized unit, with independent
    random sign.  An axle pair pushed outside the unit disc is redrawn
    (bounded retries).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if band_percent <= 0.0:
        raise ValueError("band_percent must be positive")
    vec = normalize(pose, width, height)
    lo, hi = band_percent / 200.0, band_percent / 100.0

    def draw(k: int) -> np.ndarray:
        # uniform over (lo, hi]: reflect numpy's half-open [lo, hi)
        mag = hi + lo - rng.uniform(lo, hi, size=k)
        sign = 2.0 * rng.integers(0, 2, size=k) - 1.0
        return mag * sign

    out = vec.copy()
    shift = draw(len(vec))
    out += shift
    for _ in range(1000):
        if out[4] ** 2 + out[5] ** 2 <= 1.0:
            return denormalize(out, width, height)
        pair = draw(2)
        out[4] = vec[4] + pair[0]
        out[5] = vec[5] + pair[1]
    raise InfeasiblePoseError(
        f"could not keep the axle direction inside the unit disc at "
        f"band {band_percent}%"
    )


# ---------------------------------------------------------------------------
# rotation helpers


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def minimal_rotation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Smallest-angle rotation taking unit vector a onto unit vector b."""
    c = np.cross(a, b)
    s = float(np.linalg.norm(c))
    d = float(np.dot(a, b))
    if s < 1e-12:
        if d > 0.0:
            return np.eye(3)
        # Opposite vectors: rotate by pi about a deterministic normal.
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(a)))] = 1.0
        axis = np.cross(a, helper)
        axis /= np.linalg.norm(axis)
        return rotation_about_axis(axis, math.pi)
    return rotation_about_axis(c / s, math.atan2(s, d))


def _wrap_angle(angle: float) -> float:
    """Into [0, 2*pi)."""
    out = math.fmod(angle, 2.0 * math.pi)
    if out < 0.0:
        out += 2.0 * math.pi
    return out if out < 2.0 * math.pi else 0.0


def _trig_roots(a: float, b: float, c: float, scale_ref: float) -> list[float]:
    """All gamma in [0, 2*pi) with a*cos + b*sin + c = 0."""
    amp = math.hypot(a, b)
    tiny = 1e-14 * max(scale_ref, 1e-300)
    if amp <= tiny:
        if abs(c) <= tiny:
            # Identically zero: every angle solves; offer canonical picks.
            return [0.0, math.pi]
        return []
    ratio = -c / amp
    if abs(ratio) > 1.0 + 1e-9:
        return []
    ratio = min(1.0, max(-1.0, ratio))
    alpha = math.acos(ratio)
    phi = math.atan2(b, a)
    roots = sorted({_wrap_angle(phi + alpha), _wrap_angle(phi - alpha)})
    return roots


@dataclass
class OrientationSolution:
    """One feasible spin of the wheelbase about the axle direction."""

    gamma: float
    rotation: np.ndarray  # full model-to-camera rotation
    scale: float | None  # pixels per model unit, parallel mode
    rear_depth: float | None  # rear wheel depth, perspective mode
    wheelbase_cam: np.ndarray  # rotated wheelbase vector


def solve_orientation(
    pose: Pose,
    annotations: ModelAnnotations,
    mode: str,
    width: int,
    height: int,
) -> list[OrientationSolution]:
    """All camera orientations realizing the pose, sorted by gamma.

    Raises:
        InfeasiblePoseError: when no spin projects the wheelbase onto
            delta with positive scale and (perspective) positive depth.
    """
    pose.validate()
    if mode not in ("parallel", "perspective"):
        raise ValueError(f"unknown projection mode '{mode}'")
    if mode == "perspective" and pose.focal is None:
        raise ValueError("perspective mode needs a focal length in the pose")

    target_axle = pose.axle_direction()
    base = minimal_rotation(annotations.axle, target_axle)
    wheelbase = annotations.wheelbase()
    b = base @ wheelbase
    # Spin about the axle: v(gamma) = cos*p + sin*q + r.
    axial = float(np.dot(target_axle, b))
    p = b - axial * target_axle
    q = np.cross(target_axle, b)
    r = axial * target_axle

    dx, dy = float(pose.delta[0]), float(pose.delta[1])
    if mode == "parallel":
        # Projected wheelbase direction: (v.x, -v.y).
        pw = np.array([p[0], -p[1]])
        qw = np.array([q[0], -q[1]])
        rw = np.array([r[0], -r[1]])
    else:
        f = float(pose.focal)
        nrx = (float(pose.mu[0]) - width / 2.0) / f
        nry = -(float(pose.mu[1]) - height / 2.0) / f
        # Perspective ray-relative direction:
        # (v.x + nrx*v.z, -(v.y + nry*v.z)).
        pw = np.array([p[0] + nrx * p[2], -(p[1] + nry * p[2])])
        qw = np.array([q[0] + nrx * q[2], -(q[1] + nry * q[2])])
        rw = np.array([r[0] + nrx * r[2], -(r[1] + nry * r[2])])

    amp_a = pw[0] * dy - pw[1] * dx
    amp_b = qw[0] * dy - qw[1] * dx
    amp_c = rw[0] * dy - rw[1] * dx
    delta_len = math.hypot(dx, dy)
    scale_ref = delta_len * (float(np.linalg.norm(b)) + 1e-300)

    solutions = []
    bnorm = float(np.linalg.norm(b))
    for gamma in _trig_roots(amp_a, amp_b, amp_c, scale_ref):
        cg, sg = math.cos(gamma), math.sin(gamma)
        wvec = cg * pw + sg * qw + rw
        wlen = float(np.hypot(wvec[0], wvec[1]))
        if wlen <= MIN_PROJECTED_WHEELBASE * bnorm:
            continue
        if wvec[0] * dx + wvec[1] * dy <= 0.0:
            continue
        v = cg * p + sg * q + r
        rotation = rotation_about_axis(target_axle, gamma) @ base
        if mode == "parallel":
            solutions.append(
                OrientationSolution(
                    gamma=gamma,
                    rotation=rotation,
                    scale=delta_len / wlen,
                    rear_depth=None,
                    wheelbase_cam=v,
                )
            )
        else:
            front_depth = float(pose.focal) * wlen / delta_len
            rear_depth = front_depth + float(v[2])
            if rear_depth <= NEAR_DEPTH:
                continue
            solutions.append(
                OrientationSolution(
                    gamma=gamma,
                    rotation=rotation,
                    scale=None,
                    rear_depth=rear_depth,
                    wheelbase_cam=v,
                )
            )
    if not solutions:
        raise InfeasiblePoseError(
            "no spin projects the wheelbase onto the requested delta"
        )
    return solutions


def pose_to_camera(
    pose: Pose,
    annotations: ModelAnnotations,
    mode: str,
    width: int,
    height: int,
) -> Camera:
    """Camera realizing the pose; smallest feasible spin angle wins."""
    best = solve_orientation(pose, annotations, mode, width, height)[0]
    cx, cy = width / 2.0, height / 2.0
    rotation = best.rotation
    if mode == "parallel":
        s = best.scale
        depth = PARALLEL_DEPTH_FACTOR * float(
            np.linalg.norm(annotations.wheelbase())
        )
        rear_cam = np.array(
            [
                (float(pose.mu[0]) - cx) / s,
                -(float(pose.mu[1]) - cy) / s,
                -depth,
            ]
        )
        translation = rear_cam - rotation @ annotations.rear_wheel
        return Camera(
            mode="parallel",
            rotation=rotation,
            translation=translation,
            width=width,
            height=height,
            scale=s,
        )
    f = float(pose.focal)
    d = best.rear_depth
    rear_cam = np.array(
        [
            (float(pose.mu[0]) - cx) / f * d,
            -(float(pose.mu[1]) - cy) / f * d,
            -d,
        ]
    )
    translation = rear_cam - rotation @ annotations.rear_wheel
    return Camera(
        mode="perspective",
        rotation=rotation,
        translation=translation,
        width=width,
        height=height,
        focal=f,
    )


def pose_from_camera(camera: Camera, annotations: ModelAnnotations) -> Pose:
    """Read the pose parameters back off a camera (for checks and tools)."""
    points = np.stack([annotations.rear_wheel, annotations.front_wheel])
    u, v, _ = camera.project(points)
    axle_cam = camera.rotation @ annotations.axle
    return Pose(
        mu=np.array([u[0], v[0]]),
        delta=np.array([u[1] - u[0], v[1] - v[0]]),
        psi_xy=axle_cam[:2].copy(),
        focal=camera.focal if camera.mode == "perspective" else None,
    )
