"""Procedural desk-scale car fixture: box body, cabin, four wheels.

The model frame puts the rear axle at x = 0, the front axle at
x = WHEELBASE, y up, and the axle direction along z.  The annotated
(visible) wheels sit on the +z side; the axle annotation points from
the visible rear wheel toward its partner at -z.  Reflectance varies
smoothly over every surface (see _paint_waves) so that interior
shading, not just silhouettes, constrains registration.

Run ``python -m posefit.toycar OUTDIR`` to write ``toycar.mesh`` and
``toycar.ann``.
"""

import math
import sys

import numpy as np

from .mesh import (
    Mesh,
    ModelAnnotations,
    compute_vertex_normals,
    save_annotations,
    save_mesh,
)

WHEELBASE = 2.6
TRACK = 1.4
WHEEL_RADIUS = 0.42
WHEEL_HALF_WIDTH = 0.16

BODY_REFLECTANCE = (0.85, 0.9)
CABIN_REFLECTANCE = (0.55, 0.7)
WHEEL_REFLECTANCE = (0.25, 0.3)


class _Builder:
    def __init__(self):
        self.vertices: list[tuple[float, float, float]] = []
        self.triangles: list[tuple[int, int, int]] = []
        self.reflectance: list[tuple[float, float]] = []

    def add_vertex(self, x, y, z, refl) -> int:
        self.vertices.append((x, y, z))
        self.reflectance.append(refl)
        return len(self.vertices) - 1

    def add_quad(
        self, a, b, c, d, refl, divisions: int, bulge: float = 0.0
    ) -> None:
        """Subdivided quad; a..d wound counterclockwise seen from
        outside.  A positive bulge domes the panel outward along its
        normal.  Curvature matters beyond looks: a panel with varying
        normals responds to a rigid rotation with a spatially varying
        shading change, which the lighting-invariant loss can see; a
        flat panel's response is uniform and gets absorbed by the
        fitted lighting."""
        a, b, c, d = (np.asarray(p, dtype=np.float64) for p in (a, b, c, d))
        outward = np.cross(b - a, d - a)
        norm = np.linalg.norm(outward)
        outward = outward / norm if norm > 0 else outward
        n = divisions
        grid = []
        for i in range(n + 1):
            row = []
            for j in range(n + 1):
                s, t = i / n, j / n
                point = (
                    a
                    + s * (b - a)
                    + t * (d - a)
                    + s * t * (c - b - d + a)
                )
                point = point + (
                    bulge * math.sin(math.pi * s) * math.sin(math.pi * t)
                ) * outward
                row.append(self.add_vertex(*point, refl))
            grid.append(row)
        for i in range(n):
            for j in range(n):
                p00, p10 = grid[i][j], grid[i + 1][j]
                p01, p11 = grid[i][j + 1], grid[i + 1][j + 1]
                self.triangles.append((p00, p10, p11))
                self.triangles.append((p00, p11, p01))

    def add_box(
        self,
        x0, x1, y0, y1, z0, z1,
        refl,
        divisions: int = 6,
        bulge: float = 0.0,
    ) -> None:
        corners = [
            (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
            (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
        ]
        quads = [
            (0, 3, 2, 1),  # z = z0, outward -z
            (4, 5, 6, 7),  # z = z1, outward +z
            (0, 1, 5, 4),  # y = y0
            (1, 2, 6, 5),  # x = x1
            (2, 3, 7, 6),  # y = y1
            (3, 0, 4, 7),  # x = x0
        ]
        for face_index, (qa, qb, qc, qd) in enumerate(quads):
            face_bulge = 0.0 if face_index == 2 else bulge  # keep floor flat
            self.add_quad(
                corners[qa], corners[qb], corners[qc], corners[qd],
                refl, divisions, face_bulge,
            )

    def add_wheel(self, cx, cy, cz, segments, refl) -> None:
        """Cylinder along z, centered at (cx, cy, cz)."""
        z_hi = cz + WHEEL_HALF_WIDTH
        z_lo = cz - WHEEL_HALF_WIDTH
        ring_hi, ring_lo = [], []
        for i in range(segments):
            theta = 2.0 * math.pi * i / segments
            px = cx + WHEEL_RADIUS * math.cos(theta)
            py = cy + WHEEL_RADIUS * math.sin(theta)
            ring_hi.append(self.add_vertex(px, py, z_hi, refl))
            ring_lo.append(self.add_vertex(px, py, z_lo, refl))
        center_hi = self.add_vertex(cx, cy, z_hi, refl)
        center_lo = self.add_vertex(cx, cy, z_lo, refl)
        for i in range(segments):
            j = (i + 1) % segments
            a, b = ring_hi[i], ring_lo[i]
            c, d = ring_hi[j], ring_lo[j]
            self.triangles.append((a, b, d))
            self.triangles.append((a, d, c))
            self.triangles.append((center_hi, a, c))
            self.triangles.append((center_lo, d, b))

    def finish(self) -> Mesh:
        vertices = np.array(self.vertices, dtype=np.float64)
        triangles = np.array(self.triangles, dtype=np.int32)
        normals = compute_vertex_normals(vertices, triangles)
        reflectance = _paint_waves(vertices, np.array(self.reflectance))
        return Mesh(vertices, triangles, normals, reflectance)


# Localized paint features: (center x, y, z, radius, ambient amplitude,
# diffuse amplitude).  Spread over the body and cabin like windows,
# seams and trim; amplitudes alternate so misplacements of any scale
# pair bright paint with dark photo regions somewhere.
_SPLATS = (
    (0.25, 0.80, 0.62, 0.34, -0.45, -0.35),
    (1.05, 0.45, 0.62, 0.30, 0.40, 0.30),
    (1.95, 0.70, 0.62, 0.36, -0.50, -0.40),
    (2.90, 0.50, 0.62, 0.32, 0.45, 0.35),
    (3.15, 0.95, 0.62, 0.28, -0.40, -0.30),
    (0.60, 1.00, 0.00, 0.40, 0.35, 0.30),
    (1.90, 1.05, 0.00, 0.38, -0.45, -0.35),
    (1.00, 1.35, 0.50, 0.30, -0.50, -0.40),
    (1.75, 1.30, 0.50, 0.28, 0.40, 0.30),
    (0.05, 0.45, 0.62, 0.26, 0.50, 0.40),
    (2.45, 0.35, 0.62, 0.27, -0.40, -0.35),
    (1.50, 0.30, 0.62, 0.24, 0.35, 0.30),
)


def _paint_waves(vertices: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Smooth positional modulation of the part reflectance.

    Flat-shaded faces carry no interior alignment signal: a small pose
    shift over a constant region is absorbed by the lighting fit.  Three
    layers break that down: slow waves wider than the body (local
    gradients everywhere without repeats a misaligned pose could lock
    onto), a front-to-back ramp (rules out front/rear confusions), and
    the Gaussian paint features above (their fixed spacing defeats
    matches that shrink, grow or slide the model inside its own
    silhouette, since feature distances cannot rescale).
    """
    x, y, z = vertices[:, 0], vertices[:, 1], vertices[:, 2]
    ambient_mod = (
        1.0
        + 0.20 * np.sin(1.1 * x - 0.4) * np.cos(1.5 * z + 0.7)
        + 0.13 * np.sin(1.7 * y + 0.3)
        + 0.16 * np.tanh(1.5 * (x - 1.3))
    )
    diffuse_mod = (
        1.0
        + 0.16 * np.cos(0.9 * x + 1.2) * np.sin(1.3 * z - 0.5)
        + 0.11 * np.cos(1.9 * y - 1.0)
        + 0.12 * np.tanh(1.5 * (x - 1.3))
    )
    for cx, cy, cz, radius, amp_a, amp_d in _SPLATS:
        # mirror-symmetric in z so both sides of the car are painted
        d2 = (
            (x - cx) ** 2
            + (y - cy) ** 2
            + (np.abs(z) - cz) ** 2
        )
        bump = np.exp(-d2 / (2.0 * radius * radius))
        ambient_mod += amp_a * bump
        diffuse_mod += amp_d * bump
    painted = np.empty_like(base)
    painted[:, 0] = np.clip(base[:, 0] * ambient_mod, 0.02, 1.0)
    painted[:, 1] = np.clip(base[:, 1] * diffuse_mod, 0.02, 1.0)
    return painted


def build_toy_car(segments: int = 64) -> tuple[Mesh, ModelAnnotations]:
    """The fixture mesh and its wheel annotations."""
    if segments < 3:
        raise ValueError("a wheel needs at least 3 segments")
    b = _Builder()
    b.add_box(
        -0.65, WHEELBASE + 0.65, 0.12, 1.0, -0.62, 0.62,
        BODY_REFLECTANCE, bulge=0.10,
    )
    b.add_box(
        0.55, 2.1, 1.0, 1.55, -0.5, 0.5,
        CABIN_REFLECTANCE, bulge=0.06,
    )
    half_track = TRACK / 2.0
    for x in (0.0, WHEELBASE):
        for z in (half_track, -half_track):
            b.add_wheel(x, 0.0, z, segments, WHEEL_REFLECTANCE)
    mesh = b.finish()
    annotations = ModelAnnotations(
        rear_wheel=np.array([0.0, 0.0, half_track]),
        front_wheel=np.array([WHEELBASE, 0.0, half_track]),
        axle=np.array([0.0, 0.0, -1.0]),
    )
    return mesh, annotations


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: python -m posefit.toycar OUTDIR", file=sys.stderr)
        return 1
    import os

    outdir = args[0]
    os.makedirs(outdir, exist_ok=True)
    mesh, annotations = build_toy_car()
    save_mesh(os.path.join(outdir, "toycar.mesh"), mesh)
    save_annotations(os.path.join(outdir, "toycar.ann"), annotations)
    print(
        f"wrote toycar.mesh ({len(mesh.vertices)} vertices, "
        f"{len(mesh.triangles)} triangles) and toycar.ann to {outdir}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
