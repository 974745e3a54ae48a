"""Shared fixtures: paths, small meshes, a default light."""
from pathlib import Path

import numpy as np
import pytest

from posefit.mesh import Mesh, load_annotations, load_mesh
from posefit.render import Lighting

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def car_mesh() -> Mesh:
    return load_mesh(FIXTURES / "toycar.mesh")


@pytest.fixture(scope="session")
def car_annotations():
    return load_annotations(FIXTURES / "toycar.ann")


@pytest.fixture(scope="session")
def lab_light() -> Lighting:
    return Lighting.make(90.0, 140.0, (0.35, 0.5, 0.75), 5.0)


def make_tetrahedron() -> Mesh:
    """Regular tetrahedron centered on the origin.

    Vertices sit at alternating cube corners, so every vertex normal
    must point radially outward: n_i = v_i / sqrt(3).
    """
    verts = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    )
    tris = np.array(
        [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int32
    )
    from posefit.mesh import compute_vertex_normals

    normals = compute_vertex_normals(verts, tris)
    refl = np.ones((4, 2))
    return Mesh(verts, tris, normals, refl)


@pytest.fixture()
def tetrahedron() -> Mesh:
    return make_tetrahedron()
