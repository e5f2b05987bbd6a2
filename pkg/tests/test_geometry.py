import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blebsim.assembly import volume
from blebsim.errors import DomainError
from blebsim.geometry import build_cortex, cube_sphere, discocyte_map, make_discocyte, octahedron
from blebsim.mesh import stats, vertex_normals


def test_cube_sphere_base():
    mesh = cube_sphere(0)
    assert (mesh.n_vertices, mesh.n_triangles, mesh.euler_characteristic) == (8, 12, 2)
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-15)


def test_cube_sphere_area_at_six_passes():
    assert stats(cube_sphere(6)).total_area == pytest.approx(4 * math.pi, rel=0.01)


def test_cube_sphere_volume():
    exact = 4 * math.pi / 3
    # frozen regression value; the relative deficit halves with every pass
    coarse = cube_sphere(4)
    assert volume(coarse, coarse.vertices) / exact - 1 == pytest.approx(-0.064228, abs=1e-6)
    fine = cube_sphere(6)
    assert volume(fine, fine.vertices) == pytest.approx(exact, rel=0.02)


def test_discocyte_map_pole():
    np.testing.assert_allclose(discocyte_map([0, 0, 1.0]), [0, 0, 1.0], atol=1e-15)


def test_discocyte_map_equator():
    np.testing.assert_array_equal(discocyte_map([1.0, 0, 0]), [4.0, 0, 0])


def test_discocyte_map_branch_point():
    y = np.array([0.5, 0.0, math.sqrt(0.75)])
    np.testing.assert_allclose(discocyte_map(y), [2.0, 0.0, 2.0], atol=1e-14)


def test_discocyte_profile_continuous_at_r2():
    below = discocyte_map([0.5 - 1e-13, 0, math.sqrt(1 - (0.5 - 1e-13) ** 2)])
    above = discocyte_map([0.5 + 1e-13, 0, math.sqrt(1 - (0.5 + 1e-13) ** 2)])
    assert abs(below[2] - above[2]) < 1e-11


def test_discocyte_map_domain():
    with pytest.raises(DomainError):
        discocyte_map([0, 0, 1.1])
    with pytest.raises(DomainError):
        discocyte_map(np.array([[1.0, 0, 0], [0, 0, 0.5]]))


@given(st.floats(0, 2 * math.pi), st.floats(-1, 1))
def test_discocyte_map_is_odd_in_z(phi, z):
    r = math.sqrt(max(1 - z * z, 0.0))
    y = np.array([r * math.cos(phi), r * math.sin(phi), z])
    y /= np.linalg.norm(y)
    a = discocyte_map(y)
    b = discocyte_map(y * [1, 1, -1])
    np.testing.assert_allclose(b, a * [1, 1, -1], atol=1e-14)
    assert np.hypot(a[0], a[1]) <= 4.0 + 1e-12


def test_discocyte_mesh():
    mesh = make_discocyte(6)
    assert np.linalg.norm(mesh.vertices, axis=1).max() == pytest.approx(4.0, abs=1e-12)
    assert volume(mesh, mesh.vertices) == pytest.approx(150.0, rel=0.05)
    assert mesh.euler_characteristic == 2
    assert mesh.signed_volume() > 0


def test_discocyte_mirror_symmetry():
    mesh = make_discocyte(4)
    v = mesh.vertices
    mirrored = v * [1, 1, -1]
    # every mirrored vertex coincides with some vertex
    d = np.linalg.norm(mirrored[:, None, :] - v[None, :, :], axis=2).min(axis=1)
    assert d.max() < 1e-12


def test_cortex_zero_offset(octa):
    np.testing.assert_array_equal(build_cortex(octa, 0.0), octa.vertices)


def test_cortex_octahedron_vertex():
    mesh = octahedron()
    cortex = build_cortex(mesh, 0.04)
    i = int(np.flatnonzero(np.all(mesh.vertices == [1, 0, 0], axis=1))[0])
    np.testing.assert_allclose(cortex[i], [0.96, 0, 0], atol=1e-15)


def test_cortex_offset_is_l0_along_normal():
    mesh = make_discocyte(5)
    cortex = build_cortex(mesh, 0.04)
    offset = mesh.vertices - cortex
    np.testing.assert_allclose(np.linalg.norm(offset, axis=1), 0.04, atol=1e-12)
    np.testing.assert_allclose(np.sum(offset * vertex_normals(mesh), axis=1), 0.04, atol=1e-12)


def test_cortex_rejects_negative_l0(octa):
    with pytest.raises(ValueError):
        build_cortex(octa, -0.1)
