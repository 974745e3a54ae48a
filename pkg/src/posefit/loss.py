"""Lighting-invariant mismatch between a photo and rendered attributes.

The loss compares photo pixel values F (n channels, here n = 1) with
rendered attribute vectors M (m channels, here m = 4) over a pixel set
P through their joint second-order statistics:

    loss = min(n, m) - tr[ C_FM C_MM^-1 C_MF C_FF^-1 ]

It is zero exactly when an affine map sends M to F over P, it never
exceeds min(n, m), and it is unchanged by nonsingular affine
re-illumination of either side.  For n = m = 1 it reduces to
1 - corr(F, M)^2.

All covariances are population style (divide by |P|), computed in two
passes: refined means first, central moments against them second.
Channels whose variance is negligible against their mean square are
dropped from the trace.  Inverses are exact while the covariance
spectrum stays comfortably above the noise floor; only an
ill-conditioned matrix gets a RIDGE_EPS * trace/dim diagonal ridge, so
well-posed losses match their textbook algebra to machine precision.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyPixelSetError,
    InfeasiblePoseError,
    LossConsistencyError,
    SingularChannelError,
)
from .render import AttributeImage, GrayImage, render_attributes

log = logging.getLogger(__name__)

RIDGE_EPS = 1e-10
# The ridge engages only when the smallest eigenvalue drops below
# RIDGE_GATE * trace/dim; above that the exact inverse is safe and the
# loss stays bit-faithful to its algebra.
RIDGE_GATE = 1e-8
# Channel variance below DROP_EPS * E[value^2] counts as constant.
DROP_EPS = 1e-12
# |P| below this is too small to support the statistics.
MIN_CLIP_PIXELS = 64
# Negative trace / loss beyond this magnitude means a real bug.
NEGATIVITY_LIMIT = 1e-9


@dataclass
class PixelStats:
    """Joint first and second order statistics of (F, M) over a pixel set.

    Covariances are population covariances about the stored means.
    """

    count: int
    mean_f: np.ndarray  # (n,)
    mean_m: np.ndarray  # (m,)
    c_ff: np.ndarray  # (n, n)
    c_mm: np.ndarray  # (m, m)
    c_fm: np.ndarray  # (n, m)

    @property
    def n(self) -> int:
        return len(self.mean_f)

    @property
    def m(self) -> int:
        return len(self.mean_m)

    def validate(self) -> None:
        if self.count < 1:
            raise ValueError("statistics need at least one pixel")
        for name in ("c_ff", "c_mm"):
            c = getattr(self, name)
            if not np.allclose(c, c.T, atol=1e-9 * max(1.0, float(np.abs(c).max()))):
                raise ValueError(f"{name} is not symmetric")
            w = np.linalg.eigvalsh(0.5 * (c + c.T))
            floor = -1e-9 * max(1.0, float(w.max(initial=0.0)))
            if w.min(initial=0.0) < floor:
                raise ValueError(f"{name} is not positive semidefinite")

    def merge(self, other: "PixelStats") -> "PixelStats":
        """Combine statistics of two disjoint pixel sets."""
        n1, n2 = self.count, other.count
        n12 = n1 + n2
        w1, w2 = n1 / n12, n2 / n12
        df = other.mean_f - self.mean_f
        dm = other.mean_m - self.mean_m
        mean_f = self.mean_f + w2 * df
        mean_m = self.mean_m + w2 * dm
        cross = w1 * w2
        return PixelStats(
            count=n12,
            mean_f=mean_f,
            mean_m=mean_m,
            c_ff=w1 * self.c_ff + w2 * other.c_ff + cross * np.outer(df, df),
            c_mm=w1 * self.c_mm + w2 * other.c_mm + cross * np.outer(dm, dm),
            c_fm=w1 * self.c_fm + w2 * other.c_fm + cross * np.outer(df, dm),
        )


@dataclass
class LinearFit:
    """Best affine map X -> Y under the inverse-C_YY weighted objective."""

    gains: np.ndarray  # (dim Y, dim X)
    offset: np.ndarray  # (dim Y,)
    residual: float


def clip_mask(attrs: AttributeImage) -> np.ndarray:
    """Foreground pixel set: flat row-major indices of covered pixels.

    Raises:
        EmptyPixelSetError: when nothing is covered.
    """
    idx = np.flatnonzero(attrs.coverage.ravel())
    if idx.size == 0:
        raise EmptyPixelSetError("clipping produced an empty pixel set")
    return idx


def full_pixel_set(image: GrayImage) -> np.ndarray:
    return np.arange(image.pixels.size, dtype=np.int64)


def _refined_mean(values: np.ndarray) -> np.ndarray:
    """Column means with one compensation pass over the residuals."""
    mean = values.mean(axis=0)
    return mean + (values - mean).mean(axis=0)


def _stats_of_block(f: np.ndarray, m: np.ndarray) -> PixelStats:
    mean_f = _refined_mean(f)
    mean_m = _refined_mean(m)
    fc = f - mean_f
    mc = m - mean_m
    cnt = len(f)
    return PixelStats(
        count=cnt,
        mean_f=mean_f,
        mean_m=mean_m,
        c_ff=fc.T @ fc / cnt,
        c_mm=mc.T @ mc / cnt,
        c_fm=fc.T @ mc / cnt,
    )


def accumulate_stats(
    photo, attrs, pixels: np.ndarray, partitions: int = 1
) -> PixelStats:
    """Statistics of photo values against attribute vectors over ``pixels``.

    photo may be a GrayImage or an (h, w) or (h, w, n) array; attrs an
    AttributeImage or an (h, w, m) array.  ``pixels`` holds flat
    row-major indices.  ``partitions`` > 1 splits the set into
    contiguous blocks whose statistics are merged pairwise; any
    partition count yields the same result up to rounding.
    """
    fdata = photo.pixels if isinstance(photo, GrayImage) else np.asarray(photo)
    mdata = attrs.attributes if isinstance(attrs, AttributeImage) else np.asarray(attrs)
    if fdata.ndim == 2:
        fdata = fdata[:, :, None]
    if fdata.shape[:2] != mdata.shape[:2]:
        raise ValueError(
            f"photo {fdata.shape[:2]} and attribute {mdata.shape[:2]} "
            "dimensions differ"
        )
    if len(pixels) == 0:
        raise EmptyPixelSetError("cannot accumulate statistics over no pixels")
    flat_f = fdata.reshape(-1, fdata.shape[2])[pixels]
    flat_m = mdata.reshape(-1, mdata.shape[2])[pixels]
    if partitions <= 1 or len(pixels) < 2 * partitions:
        return _stats_of_block(flat_f, flat_m)
    bounds = np.linspace(0, len(pixels), partitions + 1).astype(int)
    merged = None
    for a, b in zip(bounds[:-1], bounds[1:]):
        block = _stats_of_block(flat_f[a:b], flat_m[a:b])
        merged = block if merged is None else merged.merge(block)
    return merged


def _live_channels(cov: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Channels whose variance is not negligible against E[value^2]."""
    var = np.diag(cov)
    second_moment = var + mean * mean
    return np.flatnonzero(var > DROP_EPS * second_moment)


def _regularized_inverse(cov: np.ndarray) -> np.ndarray:
    dim = cov.shape[0]
    if dim == 0:
        return cov
    if not np.isfinite(cov).all():
        raise SingularChannelError("non-finite covariance entries")
    scale = float(np.trace(cov)) / dim
    smallest = float(np.linalg.eigvalsh(cov)[0]) if dim > 1 else scale
    if smallest > RIDGE_GATE * scale:
        return np.linalg.pinv(cov, hermitian=True)
    reg = cov + RIDGE_EPS * scale * np.eye(dim)
    return np.linalg.pinv(reg, hermitian=True)


def _alignment_trace(stats: PixelStats) -> float:
    """tr[C_FM C_MM^-1 C_MF C_FF^-1] with regularization and channel drop."""
    live_f = _live_channels(stats.c_ff, stats.mean_f)
    live_m = _live_channels(stats.c_mm, stats.mean_m)
    if live_f.size == 0 or live_m.size == 0:
        return 0.0
    c_ff = stats.c_ff[np.ix_(live_f, live_f)]
    c_mm = stats.c_mm[np.ix_(live_m, live_m)]
    c_fm = stats.c_fm[np.ix_(live_f, live_m)]
    inv_mm = _regularized_inverse(c_mm)
    inv_ff = _regularized_inverse(c_ff)
    return float(np.trace(c_fm @ inv_mm @ c_fm.T @ inv_ff))


def invariant_loss(stats: PixelStats) -> float:
    """The lighting-invariant mismatch, in [0, min(n, m)].

    Raises:
        LossConsistencyError: when numerical cleanup would have to hide
            more than NEGATIVITY_LIMIT of inconsistency.
    """
    bound = float(min(stats.n, stats.m))
    trace = _alignment_trace(stats)
    if trace < 0.0:
        if trace < -NEGATIVITY_LIMIT:
            raise LossConsistencyError(
                f"alignment trace {trace:.6g} is negative beyond tolerance"
            )
        trace = 0.0
    value = bound - trace
    if value < 0.0:
        if value < -NEGATIVITY_LIMIT:
            raise LossConsistencyError(
                f"loss {value:.6g} fell below zero beyond tolerance"
            )
        value = 0.0
    return value


def correlation_loss_1d(stats: PixelStats) -> float:
    """1 - squared correlation for single-channel F and M.

    Unregularized, like invariant_loss on well-conditioned statistics,
    so the two agree to near machine precision.  Zero variance on
    either side yields 1.0 (logged).
    """
    if stats.n != 1 or stats.m != 1:
        raise ValueError("correlation_loss_1d needs 1-channel statistics")
    var_f = float(stats.c_ff[0, 0])
    var_m = float(stats.c_mm[0, 0])
    if (
        _live_channels(stats.c_ff, stats.mean_f).size == 0
        or _live_channels(stats.c_mm, stats.mean_m).size == 0
    ):
        log.info("zero-variance channel in 1-D correlation, returning 1.0")
        return 1.0
    cov = float(stats.c_fm[0, 0])
    value = 1.0 - cov * cov / (var_f * var_m)
    return min(max(value, 0.0), 1.0)


def best_linear_fit(
    stats: PixelStats, direction: str = "photo_from_attrs"
) -> LinearFit:
    """Closed-form best affine map between the two sides.

    direction "photo_from_attrs" predicts F from M (the shading
    direction, gains shaped (n, m)); "attrs_from_photo" predicts M
    from F.  The residual is the inverse-C_YY weighted mean squared
    error of the fit, the same objective the closed form minimizes.
    """
    if direction == "photo_from_attrs":
        mean_x, mean_y = stats.mean_m, stats.mean_f
        c_xx, c_yy = stats.c_mm, stats.c_ff
        c_yx = stats.c_fm
    elif direction == "attrs_from_photo":
        mean_x, mean_y = stats.mean_f, stats.mean_m
        c_xx, c_yy = stats.c_ff, stats.c_mm
        c_yx = stats.c_fm.T
    else:
        raise ValueError(f"unknown fit direction '{direction}'")
    gains = c_yx @ _regularized_inverse(c_xx)
    if not np.isfinite(gains).all():
        bad = int(np.flatnonzero((~np.isfinite(gains)).any(axis=0))[0])
        raise SingularChannelError(
            f"regressor channel {bad} is singular beyond regularization"
        )
    offset = mean_y - gains @ mean_x
    spread = (
        gains @ c_xx @ gains.T - gains @ c_yx.T - c_yx @ gains.T + c_yy
    )
    residual = float(np.trace(spread @ _regularized_inverse(c_yy)))
    return LinearFit(gains=gains, offset=offset, residual=max(residual, 0.0))


def _offscreen_distance(pose, width: int, height: int) -> float:
    """Total normalized distance of the two wheel centers outside the
    viewport.  Zero whenever both annotated wheels project inside the
    photo, which holds for every legitimate pose by construction (the
    wheels were marked on the photo)."""
    total = 0.0
    for px, py in (pose.mu, pose.mu + pose.delta):
        x, y = px / width, py / height
        total += max(0.0, -x, x - 1.0) + max(0.0, -y, y - 1.0)
    return total


# Slope of the off-screen ramp, per unit of normalized wheel-center
# distance outside the frame.
OFFSCREEN_WEIGHT = 2.0


def pose_loss(
    photo: GrayImage,
    mesh,
    annotations,
    pose,
    mode: str = "parallel",
    clip: bool = True,
    min_pixels: int = MIN_CLIP_PIXELS,
) -> float:
    """Render the pose and score it against the photo.

    Infeasible poses and renders covering fewer than ``min_pixels``
    pixels score the penalty value min(n, m) = 1.  With ``clip`` off
    the statistics run over the whole image instead of the covered set
    (the coverage floor still applies).

    Poses whose wheel centers leave the viewport additionally pay a
    ramp penalty proportional to how far outside they sit.  A pose
    sliding off-screen shrinks its own scored pixel set, and a small
    surviving fragment can score deceptively well; the ramp restores
    the gradient pointing back into the frame and interpolates the
    hard off-screen penalty of 1.  The returned value may therefore
    exceed 1 for far off-screen poses.
    """
    from .pose import pose_to_camera

    penalty = OFFSCREEN_WEIGHT * _offscreen_distance(
        pose, photo.width, photo.height
    )
    try:
        camera = pose_to_camera(
            pose, annotations, mode, photo.width, photo.height
        )
    except InfeasiblePoseError:
        return 1.0 + penalty
    attrs = render_attributes(mesh, camera)
    covered = int(attrs.coverage.sum())
    if covered < min_pixels:
        return 1.0 + penalty
    pixels = clip_mask(attrs) if clip else full_pixel_set(photo)
    stats = accumulate_stats(photo, attrs, pixels)
    return invariant_loss(stats) + penalty
