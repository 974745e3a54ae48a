"""Triangle meshes, their text format, and wheel annotations.

The mesh file format is line oriented UTF-8 text:

    # comment (blank lines are allowed)
    v x y z          vertex position, model units
    vn x y z         optional unit vertex normal, one per vertex
    vr ka kd         optional reflectance pair in [0, 1], one per vertex
    f i j k          triangle, 1-based vertex indices

``vn`` and ``vr`` blocks, when present, must match the vertex count.
Missing normals are computed by area-weighted averaging of incident
face normals; missing reflectance defaults to ka = kd = 1.

The annotation sidecar format:

    rear_wheel x y z
    front_wheel x y z
    axle x y z

``axle`` is the direction from the annotated (visible) rear wheel
center toward its partner wheel; it is renormalized on load.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AnnotationError, MeshFormatError, MeshValidationError

# A triangle is degenerate when |e1 x e2| <= DEGENERATE_REL * max(|e1|, |e2|)^2.
DEGENERATE_REL = 1e-12


@dataclass
class Mesh:
    """Validated triangle mesh. Treat all arrays as read-only after load.

    Attributes:
        vertices: (V, 3) float64 positions in model units.
        triangles: (T, 3) int32 vertex indices, 0-based.
        normals: (V, 3) float64 unit vertex normals.
        reflectance: (V, 2) float64 ambient/diffuse pair (ka, kd) in [0, 1].
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    reflectance: np.ndarray


@dataclass
class ModelAnnotations:
    """Wheel landmarks of a car-like model, in model coordinates."""

    rear_wheel: np.ndarray
    front_wheel: np.ndarray
    axle: np.ndarray  # unit vector, visible wheel toward partner wheel

    def wheelbase(self) -> np.ndarray:
        """Vector from the rear wheel center to the front wheel center."""
        return self.front_wheel - self.rear_wheel


def _normalize_rows(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=-1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return a / safe


def compute_vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals.

    Each triangle contributes its unnormalized face cross product
    (whose magnitude is twice the triangle area) to its three corners;
    the per-vertex sums are then normalized.

    Raises:
        MeshValidationError: if some vertex has no incident triangle.
    """
    v = np.asarray(vertices, dtype=np.float64)
    t = np.asarray(triangles)
    acc = np.zeros_like(v)
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    face = np.cross(e1, e2)
    for k in range(3):
        np.add.at(acc, t[:, k], face)
    counts = np.zeros(len(v), dtype=np.int64)
    np.add.at(counts, t.ravel(), 1)
    orphan = np.flatnonzero(counts == 0)
    if orphan.size:
        raise MeshValidationError(
            f"vertex {orphan[0] + 1} has no incident triangle"
        )
    lengths = np.linalg.norm(acc, axis=1)
    bad = np.flatnonzero(lengths <= 0.0)
    if bad.size:
        raise MeshValidationError(
            f"vertex {bad[0] + 1}: incident face normals cancel, "
            "vertex normal is undefined"
        )
    return acc / lengths[:, None]


def _validate_mesh(vertices, triangles, normals, reflectance) -> None:
    nv = len(vertices)
    if nv == 0:
        raise MeshValidationError("mesh has no vertices")
    if len(triangles) == 0:
        raise MeshValidationError("mesh has no triangles")
    if not np.isfinite(vertices).all():
        bad = int(np.flatnonzero(~np.isfinite(vertices).all(axis=1))[0])
        raise MeshValidationError(f"vertex {bad + 1} has a non-finite coordinate")
    lo = triangles.min(initial=0)
    hi = triangles.max(initial=-1)
    if lo < 0 or hi >= nv:
        for i, tri in enumerate(triangles):
            if tri.min() < 0 or tri.max() >= nv:
                raise MeshValidationError(
                    f"triangle {i + 1}: vertex index {int(tri.max() + 1)} out of "
                    f"range ({nv} vertices)"
                )
    e1 = vertices[triangles[:, 1]] - vertices[triangles[:, 0]]
    e2 = vertices[triangles[:, 2]] - vertices[triangles[:, 0]]
    cross = np.linalg.norm(np.cross(e1, e2), axis=1)
    scale = np.maximum(
        np.einsum("ij,ij->i", e1, e1), np.einsum("ij,ij->i", e2, e2)
    )
    degenerate = np.flatnonzero(cross <= DEGENERATE_REL * np.maximum(scale, 1.0))
    if degenerate.size:
        raise MeshValidationError(
            f"triangle {int(degenerate[0]) + 1} is degenerate (zero area)"
        )
    lengths = np.linalg.norm(normals, axis=1)
    off = np.flatnonzero(np.abs(lengths - 1.0) > 1e-6)
    if off.size:
        raise MeshValidationError(
            f"vertex {int(off[0]) + 1}: normal length {lengths[off[0]]:.9g} "
            "is not 1 within 1e-6"
        )
    if reflectance.min(initial=0.0) < 0.0 or reflectance.max(initial=0.0) > 1.0:
        bad = int(
            np.flatnonzero(
                (reflectance < 0.0).any(axis=1) | (reflectance > 1.0).any(axis=1)
            )[0]
        )
        raise MeshValidationError(
            f"vertex {bad + 1}: reflectance outside [0, 1]"
        )


def _parse_floats(parts: list[str], count: int, lineno: int, keyword: str):
    if len(parts) != count:
        raise MeshFormatError(
            f"line {lineno}: '{keyword}' expects {count} numbers, got {len(parts)}"
        )
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise MeshFormatError(f"line {lineno}: bad number in '{keyword}' entry") from exc


def loads_mesh(text: str) -> Mesh:
    """Parse mesh text. See the module docstring for the format."""
    verts: list[list[float]] = []
    norms: list[list[float]] = []
    refls: list[list[float]] = []
    tris: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *parts = line.split()
        if keyword == "v":
            verts.append(_parse_floats(parts, 3, lineno, "v"))
        elif keyword == "vn":
            norms.append(_parse_floats(parts, 3, lineno, "vn"))
        elif keyword == "vr":
            refls.append(_parse_floats(parts, 2, lineno, "vr"))
        elif keyword == "f":
            if len(parts) != 3:
                raise MeshFormatError(
                    f"line {lineno}: 'f' expects exactly 3 vertex indices, "
                    f"got {len(parts)} (only triangles are supported)"
                )
            try:
                idx = [int(p) for p in parts]
            except ValueError as exc:
                raise MeshFormatError(
                    f"line {lineno}: bad vertex index in 'f' entry"
                ) from exc
            if min(idx) < 1:
                raise MeshFormatError(
                    f"line {lineno}: vertex indices are 1-based and positive"
                )
            tris.append([i - 1 for i in idx])
        else:
            raise MeshFormatError(f"line {lineno}: unknown keyword '{keyword}'")
    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    triangles = np.array(tris, dtype=np.int32).reshape(-1, 3)
    if norms and len(norms) != len(verts):
        raise MeshFormatError(
            f"{len(norms)} 'vn' entries for {len(verts)} vertices"
        )
    if refls and len(refls) != len(verts):
        raise MeshFormatError(
            f"{len(refls)} 'vr' entries for {len(verts)} vertices"
        )
    if len(vertices) == 0:
        raise MeshValidationError("mesh has no vertices")
    if len(triangles) == 0:
        raise MeshValidationError("mesh has no triangles")
    if triangles.max() >= len(vertices) or triangles.min() < 0:
        for i, tri in enumerate(triangles):
            if tri.max() >= len(vertices):
                raise MeshValidationError(
                    f"triangle {i + 1}: vertex index {int(tri.max()) + 1} out of "
                    f"range ({len(vertices)} vertices)"
                )
    if norms:
        normals = np.array(norms, dtype=np.float64)
    else:
        normals = compute_vertex_normals(vertices, triangles)
    if refls:
        reflectance = np.array(refls, dtype=np.float64)
    else:
        reflectance = np.ones((len(vertices), 2), dtype=np.float64)
    _validate_mesh(vertices, triangles, normals, reflectance)
    return Mesh(vertices, triangles, normals, reflectance)


def load_mesh(path) -> Mesh:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_mesh(fh.read())


def dumps_mesh(mesh: Mesh) -> str:
    """Serialize a mesh so that a reload reproduces it exactly."""
    out = []
    for x, y, z in mesh.vertices:
        out.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    for x, y, z in mesh.normals:
        out.append(f"vn {x:.17g} {y:.17g} {z:.17g}")
    for ka, kd in mesh.reflectance:
        out.append(f"vr {ka:.17g} {kd:.17g}")
    for i, j, k in mesh.triangles:
        out.append(f"f {i + 1} {j + 1} {k + 1}")
    return "\n".join(out) + "\n"


def save_mesh(path, mesh: Mesh) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_mesh(mesh))


_ANNOTATION_KEYS = ("rear_wheel", "front_wheel", "axle")


def loads_annotations(text: str) -> ModelAnnotations:
    found: dict[str, np.ndarray] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *parts = line.split()
        if keyword not in _ANNOTATION_KEYS:
            raise MeshFormatError(
                f"line {lineno}: unknown annotation '{keyword}'"
            )
        if keyword in found:
            raise MeshFormatError(f"line {lineno}: duplicate '{keyword}' entry")
        found[keyword] = np.array(
            _parse_floats(parts, 3, lineno, keyword), dtype=np.float64
        )
    missing = [k for k in _ANNOTATION_KEYS if k not in found]
    if missing:
        raise AnnotationError(f"missing annotation field '{missing[0]}'")
    axle = found["axle"]
    axle_len = float(np.linalg.norm(axle))
    if axle_len <= 0.0:
        raise AnnotationError("axle direction has zero length")
    wheelbase = found["front_wheel"] - found["rear_wheel"]
    if float(np.linalg.norm(wheelbase)) <= 0.0:
        raise AnnotationError("rear and front wheel centers coincide")
    return ModelAnnotations(
        rear_wheel=found["rear_wheel"],
        front_wheel=found["front_wheel"],
        axle=axle / axle_len,
    )


def load_annotations(path) -> ModelAnnotations:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_annotations(fh.read())


def dumps_annotations(ann: ModelAnnotations) -> str:
    out = []
    for key, vec in (
        ("rear_wheel", ann.rear_wheel),
        ("front_wheel", ann.front_wheel),
        ("axle", ann.axle),
    ):
        out.append(f"{key} {vec[0]:.17g} {vec[1]:.17g} {vec[2]:.17g}")
    return "\n".join(out) + "\n"


def save_annotations(path, ann: ModelAnnotations) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_annotations(ann))
