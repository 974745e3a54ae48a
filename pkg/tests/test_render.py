"""Rasterizer and shading: projections, coverage, depth, linearity."""
import numpy as np
import pytest

from posefit.mesh import Mesh
from posefit.render import (
    AttributeImage,
    Camera,
    GrayImage,
    Lighting,
    composite_over_background,
    render_attributes,
    shade_phong,
)


def flat_mesh(corners, ka=1.0, kd=1.0) -> Mesh:
    """Triangles in the z=0 plane with +z normals, constant reflectance."""
    verts = np.array([[u, v, 0.0] for u, v in corners], dtype=np.float64)
    n = len(verts)
    tris = np.array([[0, i, i + 1] for i in range(1, n - 1)], dtype=np.int32)
    normals = np.tile([0.0, 0.0, 1.0], (n, 1))
    refl = np.tile([ka, kd], (n, 1))
    return Mesh(verts, tris, normals, refl)


def parallel_camera(w=32, h=32, scale=1.0) -> Camera:
    return Camera(
        mode="parallel",
        rotation=np.eye(3),
        translation=np.array([0.0, 0.0, -5.0]),
        width=w,
        height=h,
        scale=scale,
    )


def test_parallel_projection_formula():
    cam = Camera("parallel", np.eye(3), np.zeros(3), 10, 10, scale=2.0)
    u, v, depth = cam.project(np.array([[1.0, 2.0, -3.0]]))
    assert u[0] == 7.0 and v[0] == 1.0 and depth[0] == 3.0


def test_perspective_projection_formula():
    cam = Camera("perspective", np.eye(3), np.zeros(3), 10, 10, focal=10.0)
    u, v, depth = cam.project(np.array([[1.0, 2.0, -3.0]]))
    assert depth[0] == 3.0
    assert u[0] == pytest.approx(5.0 + 10.0 / 3.0, abs=1e-15)
    assert v[0] == pytest.approx(5.0 - 20.0 / 3.0, abs=1e-15)


def test_face_on_triangle_attributes_and_shade_value():
    # Big face-on triangle: every covered pixel carries (1, 0, 0, 1),
    # so ambient 2 + diffuse 3 * (L=(0,0,1) . n=(0,0,1)) + offset 0.5
    # shades to exactly 5.5.
    mesh = flat_mesh([(-20, -20), (20, -20), (0, 25)])
    cam = parallel_camera()
    img = render_attributes(mesh, cam)
    img.validate()
    assert img.coverage.any()
    covered = img.attributes[img.coverage]
    assert np.allclose(covered, [1.0, 0.0, 0.0, 1.0], atol=1e-12)
    light = Lighting.make(2.0, 3.0, (0.0, 0.0, 1.0), 0.5)
    shaded = shade_phong(img, light, background=-7.0)
    assert np.allclose(shaded.pixels[img.coverage], 5.5, atol=1e-12)
    assert np.all(shaded.pixels[~img.coverage] == -7.0)


def test_axis_aligned_square_covers_exact_pixel_count():
    # Square spanning pixel columns/rows 4..11 inclusive: 8x8 = 64.
    half = 4.0
    mesh = flat_mesh([(-half, -half), (half, -half), (half, half), (-half, half)])
    cam = parallel_camera(16, 16, scale=1.0)
    img = render_attributes(mesh, cam)
    assert int(img.coverage.sum()) == 64
    rows = np.flatnonzero(img.coverage.any(axis=1))
    cols = np.flatnonzero(img.coverage.any(axis=0))
    assert rows.min() == 4 and rows.max() == 11
    assert cols.min() == 4 and cols.max() == 11


def test_shared_edge_claimed_exactly_once():
    # The square's two triangles, rendered separately, must partition
    # the 64 pixel centers: no double claim, no gap on the diagonal.
    half = 4.0
    corners = [(-half, -half), (half, -half), (half, half), (-half, half)]
    verts = np.array([[u, v, 0.0] for u, v in corners])
    normals = np.tile([0.0, 0.0, 1.0], (4, 1))
    refl = np.ones((4, 2))
    t1 = Mesh(verts, np.array([[0, 1, 2]], dtype=np.int32), normals, refl)
    t2 = Mesh(verts, np.array([[0, 2, 3]], dtype=np.int32), normals, refl)
    cam = parallel_camera(16, 16, scale=1.0)
    c1 = render_attributes(t1, cam).coverage
    c2 = render_attributes(t2, cam).coverage
    assert not np.logical_and(c1, c2).any()
    assert int(c1.sum()) + int(c2.sum()) == 64


def test_parallel_translation_equivariance_is_exact():
    mesh = flat_mesh([(-2, -1), (2, -1), (0, 2)], ka=0.7, kd=0.9)
    cam_a = parallel_camera(48, 48, scale=4.0)
    cam_b = Camera(
        mode="parallel",
        rotation=np.eye(3),
        translation=np.array([2.0, 0.0, -5.0]),
        width=48,
        height=48,
        scale=4.0,
    )
    a = render_attributes(mesh, cam_a)
    b = render_attributes(mesh, cam_b)
    # scale 4 px/unit * 2 units = dyadic 8 pixel shift: exact in floats.
    assert np.array_equal(a.coverage[:, :-8], b.coverage[:, 8:])
    assert np.array_equal(a.attributes[:, :-8], b.attributes[:, 8:])


def test_depth_resolve_prefers_near_triangle():
    verts = np.array(
        [
            [-10.0, -10.0, 0.0], [10.0, -10.0, 0.0], [0.0, 12.0, 0.0],
            [-3.0, -3.0, 2.0], [3.0, -3.0, 2.0], [0.0, 4.0, 2.0],
        ]
    )
    tris = np.array([[0, 1, 2], [3, 4, 5]], dtype=np.int32)
    normals = np.tile([0.0, 0.0, 1.0], (6, 1))
    refl = np.array([[1.0, 1.0]] * 3 + [[0.5, 0.25]] * 3)
    mesh = Mesh(verts, tris, normals, refl)
    cam = parallel_camera()
    img, depth = render_attributes(mesh, cam, return_depth=True)
    # Far plane sits at z=0 (depth 5), near at z=2 (depth 3).  The
    # interpolated ka drifts by float epsilon, so match with isclose.
    near = np.isclose(img.attributes[:, :, 0], 0.5, atol=1e-9)
    assert near.any()
    assert np.allclose(depth[near], 3.0, atol=1e-12)
    far = img.coverage & ~near
    assert np.allclose(depth[far], 5.0, atol=1e-12)
    assert np.all(np.isinf(depth[~img.coverage]))


def test_exact_depth_tie_keeps_first_triangle():
    verts = np.array(
        [[-8.0, -8.0, 0.0], [8.0, -8.0, 0.0], [0.0, 9.0, 0.0]]
    )
    tris = np.array([[0, 1, 2], [0, 1, 2]], dtype=np.int32)
    normals = np.tile([0.0, 0.0, 1.0], (3, 1))
    refl = np.array([[0.9, 0.9], [0.9, 0.9], [0.9, 0.9]])
    first = Mesh(verts, tris, normals, refl)
    img = render_attributes(first, parallel_camera())
    assert np.allclose(img.attributes[img.coverage][:, 0], 0.9)


def test_interpolated_normal_magnitude_equals_diffuse_reflectance():
    # Corner normals disagree, so interpolation shortens them; the
    # renderer must renormalize before scaling by kd = 0.7.
    verts = np.array([[-9.0, -9.0, 0.0], [9.0, -9.0, 0.0], [0.0, 10.0, 0.0]])
    tris = np.array([[0, 1, 2]], dtype=np.int32)
    s = 1.0 / np.sqrt(2.0)
    normals = np.array([[s, 0.0, s], [0.0, s, s], [0.0, 0.0, 1.0]])
    refl = np.tile([1.0, 0.7], (3, 1))
    mesh = Mesh(verts, tris, normals, refl)
    img = render_attributes(mesh, parallel_camera())
    lengths = np.linalg.norm(img.attributes[img.coverage][:, 1:], axis=1)
    assert np.allclose(lengths, 0.7, atol=1e-12)


def test_rotation_rotates_rendered_normals():
    mesh = flat_mesh([(-8, -8), (8, -8), (0, 9)])
    # 30 degree turn about y: model +z normals tilt to (1/2, 0, v3/2).
    c, s = np.sqrt(3.0) / 2.0, 0.5
    rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    cam = Camera("parallel", rot, np.array([0.0, 0.0, -30.0]), 32, 32, scale=1.0)
    img = render_attributes(mesh, cam)
    assert img.coverage.any()
    covered = img.attributes[img.coverage]
    assert np.allclose(covered[:, 1:], [s, 0.0, c], atol=1e-12)


def test_shading_is_linear_in_lighting_gains():
    mesh = flat_mesh([(-6, -6), (6, -6), (0, 7)], ka=0.8, kd=0.6)
    img = render_attributes(mesh, parallel_camera())
    base = Lighting.make(1.5, 2.5, (0.3, -0.4, 0.866), 0.75)
    scaled = Lighting(
        ambient=3.0 * base.ambient,
        diffuse=3.0 * base.diffuse,
        direction=base.direction,
        offset=3.0 * base.offset,
    )
    a = shade_phong(img, base).pixels
    b = shade_phong(img, scaled).pixels
    assert np.allclose(b, 3.0 * a, atol=1e-12)


def test_shading_with_pure_ambient_reads_back_ka():
    mesh = flat_mesh([(-6, -6), (6, -6), (0, 7)], ka=0.35, kd=0.9)
    img = render_attributes(mesh, parallel_camera())
    light = Lighting.make(1.0, 0.0, (0.0, 0.0, 1.0), 0.0)
    shaded = shade_phong(img, light)
    assert np.allclose(shaded.pixels[img.coverage], 0.35, atol=1e-12)


def test_unclamped_diffuse_can_go_negative():
    # Light from behind: the diffuse dot product is negative and must
    # stay negative (no clamping) to keep shading affine in attributes.
    mesh = flat_mesh([(-6, -6), (6, -6), (0, 7)])
    img = render_attributes(mesh, parallel_camera())
    light = Lighting.make(0.0, 2.0, (0.0, 0.0, -1.0), 0.0)
    shaded = shade_phong(img, light)
    assert np.all(shaded.pixels[img.coverage] < 0.0)


def test_perspective_size_scales_inverse_depth():
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    counts = []
    for z in (-2.0, -4.0):
        verts = np.array([[u, v, 0.0] for u, v in corners])
        mesh = flat_mesh(corners)
        cam = Camera(
            "perspective",
            np.eye(3),
            np.array([0.0, 0.0, z]),
            128,
            128,
            focal=60.0,
        )
        counts.append(int(render_attributes(mesh, cam).coverage.sum()))
    ratio = counts[0] / counts[1]
    assert ratio == pytest.approx(4.0, rel=0.05)


def test_perspective_skips_triangles_at_the_pinhole():
    mesh = flat_mesh([(-5, -5), (5, -5), (0, 6)])
    cam = Camera("perspective", np.eye(3), np.zeros(3), 32, 32, focal=10.0)
    img = render_attributes(mesh, cam)
    assert not img.coverage.any()
    assert np.all(img.attributes == 0.0)


def test_geometry_outside_viewport_renders_empty():
    mesh = flat_mesh([(100, 100), (104, 100), (102, 104)])
    img, depth = render_attributes(mesh, parallel_camera(), return_depth=True)
    assert not img.coverage.any()
    assert np.all(np.isinf(depth))


def test_degenerate_projection_is_dropped():
    # An edge-on triangle projects to a zero-area segment.
    verts = np.array([[0.0, -5.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 4.0]])
    tris = np.array([[0, 1, 2]], dtype=np.int32)
    normals = np.tile([1.0, 0.0, 0.0], (3, 1))
    mesh = Mesh(verts, tris, normals, np.ones((3, 2)))
    img = render_attributes(mesh, parallel_camera())
    assert not img.coverage.any()


def test_attribute_image_validation_catches_corruption():
    img = render_attributes(
        flat_mesh([(-4, -4), (4, -4), (0, 5)]), parallel_camera()
    )
    img.validate()
    bad = AttributeImage(img.attributes.copy(), img.coverage.copy())
    iy, ix = np.argwhere(~bad.coverage)[0]
    bad.attributes[iy, ix, 0] = 0.5
    with pytest.raises(ValueError):
        bad.validate()


def test_composite_selects_by_coverage():
    img = render_attributes(
        flat_mesh([(-4, -4), (4, -4), (0, 5)]), parallel_camera()
    )
    fg = GrayImage(np.full((32, 32), 9.0))
    bg = GrayImage(np.arange(32.0 * 32.0).reshape(32, 32))
    out = composite_over_background(fg, img.coverage, bg)
    assert np.all(out.pixels[img.coverage] == 9.0)
    assert np.array_equal(out.pixels[~img.coverage], bg.pixels[~img.coverage])
    with pytest.raises(ValueError):
        composite_over_background(fg, img.coverage, GrayImage(np.zeros((8, 8))))


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera("spherical", np.eye(3), np.zeros(3), 8, 8).validate()
    with pytest.raises(ValueError):
        Camera("parallel", np.eye(3), np.zeros(3), 8, 8, scale=0.0).validate()
    with pytest.raises(ValueError):
        Camera("perspective", np.eye(3), np.zeros(3), 8, 8, focal=0.0).validate()
    with pytest.raises(ValueError):
        Camera("parallel", np.eye(3) * 2.0, np.zeros(3), 8, 8).validate()
    with pytest.raises(ValueError):
        Camera("parallel", np.eye(3), np.zeros(3), 0, 8).validate()
    Camera("parallel", np.eye(3), np.zeros(3), 8, 8).validate()


def test_lighting_validation():
    light = Lighting.make(1.0, 1.0, (3.0, 0.0, 0.0))
    assert np.allclose(light.direction, [1.0, 0.0, 0.0])
    light.validate()
    with pytest.raises(ValueError):
        Lighting.make(1.0, 1.0, (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        Lighting(1.0, 1.0, np.array([1.0, 1.0, 0.0]), 0.0).validate()
