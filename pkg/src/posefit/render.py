"""Software rasterization of per-pixel shading attributes, plus shading.

Conventions, used consistently everywhere:

* Camera frame is right handed: x right, y up, z toward the viewer.
  The camera sits at the origin looking along -z, so visible geometry
  has negative z and depth is defined as -z.
* Image coordinates (u, v): u grows rightward, v grows DOWNWARD.
  The pixel at column ix, row iy covers [ix, ix+1) x [iy, iy+1) and is
  sampled at its center (ix + 0.5, iy + 0.5).
* Parallel projection:     u = w/2 + scale * x,        v = h/2 - scale * y
* Perspective projection:  u = w/2 + focal * x/depth,  v = h/2 - focal * y/depth
  with focal in pixels.

Rasterization fills pixels whose centers lie inside the projected
triangle, with ties on edges resolved by the top-left rule, so two
triangles sharing an edge never both claim a pixel center on it.
Depth is compared at pixel centers; the smaller depth wins and exact
depth ties keep the earlier triangle.  Attributes (ambient reflectance,
diffuse reflectance, camera-frame unit normal) are interpolated with
screen-space barycentric weights in both projection modes; the
interpolated normal is renormalized before scaling by the interpolated
diffuse reflectance.  There is no antialiasing and no back-face culling.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

# Triangles with any vertex closer than this to the pinhole are skipped
# in perspective mode.
NEAR_LIMIT = 1e-6


@dataclass
class GrayImage:
    """Single-channel float image, indexed pixels[row, col]."""

    pixels: np.ndarray

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class AttributeImage:
    """Per-pixel shading attributes and a coverage mask.

    attributes[iy, ix] = (ka, kd*nx, kd*ny, kd*nz) with n the unit
    surface normal in camera coordinates; exactly zero where coverage
    is False.
    """

    attributes: np.ndarray  # (h, w, 4) float64
    coverage: np.ndarray  # (h, w) bool

    @property
    def width(self) -> int:
        return self.attributes.shape[1]

    @property
    def height(self) -> int:
        return self.attributes.shape[0]

    def validate(self) -> None:
        if self.attributes.shape[:2] != self.coverage.shape:
            raise ValueError("attribute and coverage shapes differ")
        if not np.isfinite(self.attributes).all():
            raise ValueError("non-finite attribute value")
        if np.any(self.attributes[~self.coverage] != 0.0):
            raise ValueError("nonzero attributes outside coverage")
        if np.any(self.attributes[:, :, 0] < 0.0):
            raise ValueError("negative ambient reflectance")


@dataclass
class Lighting:
    """Global illumination parameters.

    ambient and diffuse are source intensities, direction is the unit
    vector toward the light in camera coordinates, offset is a constant
    additive term.
    """

    ambient: float
    diffuse: float
    direction: np.ndarray
    offset: float = 0.0

    @classmethod
    def make(cls, ambient, diffuse, direction, offset=0.0) -> "Lighting":
        """Build a Lighting with the direction normalized."""
        d = np.asarray(direction, dtype=np.float64)
        n = float(np.linalg.norm(d))
        if n <= 0.0:
            raise ValueError("light direction has zero length")
        return cls(float(ambient), float(diffuse), d / n, float(offset))

    def validate(self) -> None:
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-9:
            raise ValueError("light direction is not a unit vector")
        for name in ("ambient", "diffuse", "offset"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite lighting field '{name}'")


@dataclass
class Camera:
    """Projection of model coordinates onto the image.

    rotation/translation map model points into the camera frame;
    scale (pixels per model unit) applies in parallel mode and
    focal (pixels) in perspective mode.
    """

    mode: str
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)
    width: int
    height: int
    scale: float = 1.0
    focal: float = 0.0

    def validate(self) -> None:
        if self.mode not in ("parallel", "perspective"):
            raise ValueError(f"unknown camera mode '{self.mode}'")
        if self.width < 1 or self.height < 1:
            raise ValueError("viewport must be at least 1x1")
        if self.mode == "parallel" and not self.scale > 0.0:
            raise ValueError("parallel mode needs scale > 0")
        if self.mode == "perspective" and not self.focal > 0.0:
            raise ValueError("perspective mode needs focal > 0")
        rtr = self.rotation.T @ self.rotation
        if not np.allclose(rtr, np.eye(3), atol=1e-9):
            raise ValueError("camera rotation is not orthonormal")

    def to_camera_frame(self, points: np.ndarray) -> np.ndarray:
        """Apply the rigid transform to (N, 3) model points."""
        r, t = self.rotation, self.translation
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        return np.stack(
            [
                r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + t[0],
                r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + t[1],
                r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + t[2],
            ],
            axis=1,
        )

    def rotate_to_camera_frame(self, vectors: np.ndarray) -> np.ndarray:
        r = self.rotation
        x, y, z = vectors[:, 0], vectors[:, 1], vectors[:, 2]
        return np.stack(
            [
                r[0, 0] * x + r[0, 1] * y + r[0, 2] * z,
                r[1, 0] * x + r[1, 1] * y + r[1, 2] * z,
                r[2, 0] * x + r[2, 1] * y + r[2, 2] * z,
            ],
            axis=1,
        )

    def project_camera_points(self, cam: np.ndarray):
        """Project camera-frame points; returns (u, v, depth)."""
        cx, cy = self.width / 2.0, self.height / 2.0
        depth = -cam[:, 2]
        if self.mode == "parallel":
            u = cx + self.scale * cam[:, 0]
            v = cy - self.scale * cam[:, 1]
        else:
            # Points at the pinhole plane produce inf/nan here; the
            # rasterizer drops their triangles via NEAR_LIMIT.
            with np.errstate(divide="ignore", invalid="ignore"):
                u = cx + self.focal * cam[:, 0] / depth
                v = cy - self.focal * cam[:, 1] / depth
        return u, v, depth

    def project(self, points: np.ndarray):
        """Project (N, 3) model points; returns (u, v, depth)."""
        return self.project_camera_points(self.to_camera_frame(points))


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    """[0..c0-1, 0..c1-1, ...] for the given counts."""
    total = int(counts.sum())
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - starts


def render_attributes(mesh: Mesh, camera: Camera, return_depth: bool = False):
    """Rasterize the mesh into an AttributeImage.

    Returns the AttributeImage, or (AttributeImage, depth buffer) when
    return_depth is set; uncovered depth entries are +inf.
    """
    h, w = camera.height, camera.width
    attrs = np.zeros((h, w, 4), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=bool)
    depth_buf = np.full(h * w, np.inf)

    cam = camera.to_camera_frame(mesh.vertices)
    u, v, depth = camera.project_camera_points(cam)

    tri = mesh.triangles.astype(np.int64)
    if camera.mode == "perspective":
        # A triangle touching the pinhole plane cannot be projected.
        ok = (depth[tri] > NEAR_LIMIT).all(axis=1)
        tri = tri[ok]
    if len(tri) == 0:
        img = AttributeImage(attributes=attrs, coverage=coverage)
        return (img, depth_buf.reshape(h, w)) if return_depth else img

    i0, i1, i2 = tri[:, 0], tri[:, 1], tri[:, 2]
    u0, u1, u2 = u[i0], u[i1], u[i2]
    v0, v1, v2 = v[i0], v[i1], v[i2]
    area2 = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)

    # Normalize winding so that edge weights are positive inside.
    flip = area2 < 0.0
    i1f = np.where(flip, i2, i1)
    i2f = np.where(flip, i1, i2)
    i1, i2 = i1f, i2f
    u1, v1 = u[i1], v[i1]
    u2, v2 = u[i2], v[i2]
    area2 = np.abs(area2)

    keep = area2 > 0.0
    if not keep.all():
        i0, i1, i2 = i0[keep], i1[keep], i2[keep]
        u0, u1, u2 = u0[keep], u1[keep], u2[keep]
        v0, v1, v2 = v0[keep], v1[keep], v2[keep]
        area2 = area2[keep]
    if len(area2) == 0:
        img = AttributeImage(attributes=attrs, coverage=coverage)
        return (img, depth_buf.reshape(h, w)) if return_depth else img

    # Pixel-center bounding boxes, clipped to the viewport.
    umin = np.minimum(np.minimum(u0, u1), u2)
    umax = np.maximum(np.maximum(u0, u1), u2)
    vmin = np.minimum(np.minimum(v0, v1), v2)
    vmax = np.maximum(np.maximum(v0, v1), v2)
    x0 = np.maximum(np.ceil(umin - 0.5), 0.0).astype(np.int64)
    x1 = np.minimum(np.floor(umax - 0.5), w - 1).astype(np.int64)
    y0 = np.maximum(np.ceil(vmin - 0.5), 0.0).astype(np.int64)
    y1 = np.minimum(np.floor(vmax - 0.5), h - 1).astype(np.int64)
    bw = np.maximum(x1 - x0 + 1, 0)
    bh = np.maximum(y1 - y0 + 1, 0)
    counts = bw * bh
    nonempty = counts > 0
    if not nonempty.any():
        img = AttributeImage(attributes=attrs, coverage=coverage)
        return (img, depth_buf.reshape(h, w)) if return_depth else img

    tid_pool = np.flatnonzero(nonempty)
    counts = counts[tid_pool]

    # Edge weight of edge (a, b) at p:
    #   e = (b.u-a.u)(p.v-a.v) - (b.v-a.v)(p.u-a.u) = A*p.v + B*p.u + C
    def edge_coeffs(au, av, bu, bv):
        ea = bu - au
        eb = -(bv - av)
        ec = (bv - av) * au - (bu - au) * av
        top = (av == bv) & (bu > au)
        left = bv < av
        return ea, eb, ec, top | left

    e0 = edge_coeffs(u1, v1, u2, v2)  # opposite vertex 0
    e1 = edge_coeffs(u2, v2, u0, v0)
    e2 = edge_coeffs(u0, v0, u1, v1)

    # One candidate per (triangle, bbox pixel).
    ctid = np.repeat(tid_pool, counts)
    offs = _ragged_arange(counts)
    cbw = bw[ctid]
    col = x0[ctid] + offs % cbw
    row = y0[ctid] + offs // cbw
    pcu = col + 0.5
    pcv = row + 0.5

    inside = np.ones(len(ctid), dtype=bool)
    weights = []
    for ea, eb, ec, tl in (e0, e1, e2):
        wgt = ea[ctid] * pcv + eb[ctid] * pcu + ec[ctid]
        inside &= (wgt > 0.0) | ((wgt == 0.0) & tl[ctid])
        weights.append(wgt)

    ctid = ctid[inside]
    if len(ctid) == 0:
        img = AttributeImage(attributes=attrs, coverage=coverage)
        return (img, depth_buf.reshape(h, w)) if return_depth else img
    col = col[inside]
    row = row[inside]
    inv_area = 1.0 / area2[ctid]
    l0 = weights[0][inside] * inv_area
    l1 = weights[1][inside] * inv_area
    l2 = weights[2][inside] * inv_area

    d0, d1, d2 = depth[i0], depth[i1], depth[i2]
    cdepth = l0 * d0[ctid] + l1 * d1[ctid] + l2 * d2[ctid]
    pix = row * w + col

    # Depth resolve: smallest depth per pixel, exact ties keep the
    # earliest candidate (triangle order, then row-major bbox order).
    np.minimum.at(depth_buf, pix, cdepth)
    contest = cdepth == depth_buf[pix]
    seq_buf = np.full(h * w, np.iinfo(np.int64).max)
    seq = np.flatnonzero(contest)
    np.minimum.at(seq_buf, pix[contest], seq)
    win = seq[seq_buf[pix[contest]] == seq]

    wtid = ctid[win]
    wl0, wl1, wl2 = l0[win], l1[win], l2[win]
    wi0, wi1, wi2 = i0[wtid], i1[wtid], i2[wtid]

    cam_normals = camera.rotate_to_camera_frame(mesh.normals)
    refl = mesh.reflectance
    ka = wl0 * refl[wi0, 0] + wl1 * refl[wi1, 0] + wl2 * refl[wi2, 0]
    kd = wl0 * refl[wi0, 1] + wl1 * refl[wi1, 1] + wl2 * refl[wi2, 1]
    n = (
        wl0[:, None] * cam_normals[wi0]
        + wl1[:, None] * cam_normals[wi1]
        + wl2[:, None] * cam_normals[wi2]
    )
    nlen = np.linalg.norm(n, axis=1)
    n = n / np.where(nlen > 0.0, nlen, 1.0)[:, None]

    wrow, wcol = row[win], col[win]
    attrs[wrow, wcol, 0] = ka
    attrs[wrow, wcol, 1:] = kd[:, None] * n
    coverage[wrow, wcol] = True

    img = AttributeImage(attributes=attrs, coverage=coverage)
    return (img, depth_buf.reshape(h, w)) if return_depth else img


def shade_phong(
    attrs: AttributeImage, lighting: Lighting, background: float = 0.0
) -> GrayImage:
    """Shade attributes: ambient*ka + diffuse*(L . kd*n) + offset.

    Uncovered pixels receive the background fill value.  The result is
    exactly affine in the attribute vector, with gains (ambient,
    diffuse*L) and offset as the constant term.
    """
    a = attrs.attributes
    lx, ly, lz = lighting.direction
    shaded = (
        lighting.ambient * a[:, :, 0]
        + lighting.diffuse * (lx * a[:, :, 1] + ly * a[:, :, 2] + lz * a[:, :, 3])
        + lighting.offset
    )
    return GrayImage(np.where(attrs.coverage, shaded, float(background)))


def composite_over_background(
    foreground: GrayImage, coverage: np.ndarray, background: GrayImage
) -> GrayImage:
    """Covered pixels from the foreground, the rest from the background."""
    if foreground.pixels.shape != background.pixels.shape:
        raise ValueError(
            f"foreground {foreground.pixels.shape} and background "
            f"{background.pixels.shape} dimensions differ"
        )
    if coverage.shape != foreground.pixels.shape:
        raise ValueError("coverage mask does not match image dimensions")
    return GrayImage(np.where(coverage, foreground.pixels, background.pixels))
