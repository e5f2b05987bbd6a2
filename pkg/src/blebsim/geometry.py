"""Scenario geometry: cube-sphere meshes, the discocyte shape and the cortex."""

import numpy as np

from .errors import DomainError
from .mesh import build_mesh, refine_bisect, vertex_normals

_CUBE_VERTICES = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=float,
) / np.sqrt(3.0)

# two triangles per square face, outward orientation
_CUBE_TRIANGLES = np.array(
    [
        [0, 3, 2], [0, 2, 1],  # z = -1
        [4, 5, 6], [4, 6, 7],  # z = +1
        [0, 1, 5], [0, 5, 4],  # y = -1
        [2, 3, 7], [2, 7, 6],  # y = +1
        [1, 2, 6], [1, 6, 5],  # x = +1
        [0, 4, 7], [0, 7, 3],  # x = -1
    ]
)


def unit_sphere_projector(p):
    p = np.asarray(p, dtype=float)
    return p / np.linalg.norm(p)


def octahedron():
    """Regular octahedron with vertices at the unit axis points."""
    v = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    t = [
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ]
    return build_mesh(v, t)


def cube_sphere(n_passes):
    """Unit-sphere triangulation from a cube with diagonally cut faces.

    The 12-triangle base is refined by ``n_passes`` longest-edge bisection
    passes, projecting every new vertex back onto the unit sphere.
    """
    base = build_mesh(_CUBE_VERTICES, _CUBE_TRIANGLES)
    return refine_bisect(base, n_passes, projector=unit_sphere_projector)


def _profile(r):
    r = np.asarray(r, dtype=float)
    inner = (3.0 - np.cos(np.pi * r / 2.0)) / 2.0
    outer = np.sqrt(np.clip(4.0 - (r - 2.0) ** 2, 0.0, None))
    return np.where(r <= 2.0, inner, outer)


def discocyte_map(y, tol=1e-9):
    """Deform points of the unit sphere into the biconcave reference shape.

    Accepts a single point or an (N, 3) array.
    """
    y = np.asarray(y, dtype=float)
    pts = np.atleast_2d(y)
    radii = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(radii - 1.0) > tol):
        raise DomainError(f"points must lie on the unit sphere (|y| = {radii.min()}..{radii.max()})")
    x = 4.0 * pts[:, 0]
    yy = 4.0 * pts[:, 1]
    r = np.sqrt(x**2 + yy**2)
    out = np.column_stack([x, yy, np.sign(pts[:, 2]) * _profile(r)])
    return out[0] if y.ndim == 1 else out


def make_discocyte(n_passes):
    sphere = cube_sphere(n_passes)
    return build_mesh(discocyte_map(sphere.vertices), sphere.triangles)


def build_cortex(mesh, l0, normals=None):
    """Cortex anchor points ``v - l0 * n(v)`` using nodal normals."""
    if l0 < 0:
        raise ValueError("l0 must be >= 0")
    if normals is None:
        normals = vertex_normals(mesh)
    return mesh.vertices - l0 * normals
