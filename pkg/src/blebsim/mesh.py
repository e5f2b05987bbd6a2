"""Indexed triangle surface meshes.

A :class:`SurfaceMesh` stores vertex positions, oriented triangles and the
per-triangle geometry every finite element operator needs: the unit normal,
the area and the constant surface gradients of the three linear nodal basis
functions. Meshes are immutable once built; refinement returns a new mesh.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTriangle,
    InconsistentOrientation,
    MeshError,
    NonManifoldEdge,
    ProjectorFailure,
    ZeroNormal,
)

logger = logging.getLogger(__name__)

AREA_THRESHOLD = 1e-14
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class MeshStats:
    n_vertices: int
    n_triangles: int
    h_max: float
    total_area: float


class SurfaceMesh:
    """Triangulated surface with cached per-triangle geometry.

    Parameters
    ----------
    vertices : (N, 3) float array
    triangles : (F, 3) int array
        Vertex indices; for closed surfaces the right-hand-rule normal
        points outward.

    Attributes
    ----------
    normals : (F, 3) array
        Unit triangle normals.
    areas : (F,) array
    grads : (F, 3, 3) array
        ``grads[t, i]`` is the surface gradient of the nodal basis function
        of local vertex ``i`` on triangle ``t``.

    Use :func:`build_mesh` to construct a validated instance.
    """

    def __init__(self, vertices, triangles):
        v = np.array(vertices, dtype=float).reshape(-1, 3)
        t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        n = np.cross(p1 - p0, p2 - p0)
        twice_area = np.linalg.norm(n, axis=1)
        self.vertices = v
        self.triangles = t
        self.areas = 0.5 * twice_area
        with np.errstate(divide="ignore", invalid="ignore"):
            self.normals = n / twice_area[:, None]
            # grad phi_i = nu x (p_{i+2} - p_{i+1}) / (2A)
            opp = np.stack([p2 - p1, p0 - p2, p1 - p0], axis=1)
            self.grads = np.cross(self.normals[:, None, :], opp) / twice_area[:, None, None]
        for arr in (self.vertices, self.triangles, self.areas, self.normals, self.grads):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def edges(self):
        """Unique undirected edges as a sorted (E, 2) array."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def signed_volume(self):
        """Enclosed volume of the identity map (divergence theorem)."""
        centroids = self.vertices[self.triangles].mean(axis=1)
        return float(np.sum(self.areas / 3.0 * np.einsum("ij,ij->i", self.normals, centroids)))

    def __repr__(self):
        return f"SurfaceMesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"


def _check_topology(triangles, closed):
    directed = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    _, counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise InconsistentOrientation("a directed edge is traversed twice in the same direction")
    _, ucounts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    if np.any(ucounts > 2):
        raise NonManifoldEdge("edge shared by more than two triangles")
    if closed and np.any(ucounts != 2):
        raise NonManifoldEdge(f"{int(np.sum(ucounts == 1))} boundary edges on a mesh declared closed")


def build_mesh(vertices, triangles, closed=True, orient_outward=True):
    """Build and validate a :class:`SurfaceMesh`.

    With ``closed=True`` every edge must be shared by exactly two triangles.
    Open patches (``closed=False``) may have boundary edges but are still
    checked for degenerate triangles and consistent orientation. Closed
    meshes whose enclosed signed volume is negative get all triangles
    flipped when ``orient_outward`` is set.
    """
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != 3:
        raise MeshError(f"vertices must have shape (N, 3), got {v.shape}")
    if t.ndim != 2 or t.shape[1] != 3:
        raise MeshError(f"triangles must have shape (F, 3), got {t.shape}")
    if not np.all(np.isfinite(v)):
        raise MeshError("non-finite vertex coordinates")
    if t.size and (t.min() < 0 or t.max() >= len(v)):
        raise MeshError("triangle index out of range")
    if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
        raise DegenerateTriangle("triangle with repeated vertex index")

    mesh = SurfaceMesh(v, t)
    bad = np.flatnonzero(~(mesh.areas > AREA_THRESHOLD))
    if bad.size:
        raise DegenerateTriangle(
            f"triangle {bad[0]} has area {mesh.areas[bad[0]]:.3e} <= {AREA_THRESHOLD}"
        )
    _check_topology(t, closed)
    if closed and orient_outward and mesh.signed_volume() < 0:
        logger.info("flipping triangle orientation to make normals point outward")
        mesh = SurfaceMesh(v, t[:, ::-1])
    return mesh


def triangle_geometry(mesh, t):
    """Return ``(normal, area, gradients)`` of triangle ``t``."""
    return mesh.normals[t], float(mesh.areas[t]), mesh.grads[t]


def _longest_edge(tri, verts):
    """Local index k such that the edge (tri[k], tri[k+1]) is the longest.

    Near-equal lengths (relative 1e-12) are resolved by the lexicographically
    smallest sorted vertex pair.
    """
    lengths = []
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        d = verts[a] - verts[b]
        lengths.append(d @ d)
    top = max(lengths)
    candidates = [k for k in range(3) if lengths[k] >= top * (1.0 - 2 * TIE_RTOL)]
    if len(candidates) == 1:
        return candidates[0]
    return min(candidates, key=lambda k: tuple(sorted((tri[k], tri[(k + 1) % 3]))))


def _edges_of(tri):
    a, b, c = tri
    return (
        (a, b) if a < b else (b, a),
        (b, c) if b < c else (c, b),
        (c, a) if c < a else (a, c),
    )


def refine_bisect(mesh, n_passes, projector=None, closed=True):
    """Conforming longest-edge bisection.

    Every pass bisects each triangle once through its longest edge; a
    triangle left with a hanging node is bisected again through its own
    longest edge until the mesh is conforming. New vertices are
    ``projector(midpoint)``.

    Parameters
    ----------
    mesh : SurfaceMesh
    n_passes : int
    projector : callable, optional
        Maps a 3-vector to a 3-vector. Identity if omitted.
    closed : bool
        Forwarded to :func:`build_mesh`.
    """
    if n_passes < 0:
        raise ValueError("n_passes must be >= 0")
    if n_passes == 0:
        return mesh
    verts = [np.array(p) for p in mesh.vertices]
    tris = [tuple(int(i) for i in tri) for tri in mesh.triangles]

    for _ in range(n_passes):
        midpoints = {}

        def bisect(tri):
            k = _longest_edge(tri, verts)
            p, q, r = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            key = (p, q) if p < q else (q, p)
            m = midpoints.get(key)
            if m is None:
                new = 0.5 * (verts[p] + verts[q])
                if projector is not None:
                    new = np.asarray(projector(new), dtype=float)
                if new.shape != (3,) or not np.all(np.isfinite(new)):
                    raise ProjectorFailure(f"projector returned {new!r} for edge {key}")
                m = len(verts)
                verts.append(new)
                midpoints[key] = m
            return (p, m, r), (m, q, r)

        stack = [(tri, True) for tri in reversed(tris)]
        done = []
        while True:
            while stack:
                tri, marked = stack.pop()
                if marked or any(e in midpoints for e in _edges_of(tri)):
                    c1, c2 = bisect(tri)
                    stack.append((c2, False))
                    stack.append((c1, False))
                else:
                    done.append(tri)
            # closure: triangles accepted earlier may have gained a hanging node
            keep = []
            for tri in done:
                if any(e in midpoints for e in _edges_of(tri)):
                    stack.append((tri, False))
                else:
                    keep.append(tri)
            done = keep
            if not stack:
                break
        tris = done

    refined = build_mesh(np.array(verts), np.array(tris), closed=closed, orient_outward=False)
    logger.debug("refined %r -> %r in %d passes", mesh, refined, n_passes)
    return refined


def vertex_normals(mesh):
    """Area-weighted average of incident triangle normals, normalized."""
    acc = np.zeros_like(mesh.vertices)
    weighted = mesh.normals * mesh.areas[:, None]
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], weighted)
    weight = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(weight, mesh.triangles[:, k], mesh.areas)
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = acc / weight[:, None]
    norms = np.linalg.norm(avg, axis=1)
    bad = np.flatnonzero(~(norms >= 1e-12))
    if bad.size:
        raise ZeroNormal(f"vertex {bad[0]} has a vanishing averaged normal")
    return avg / norms[:, None]


def stats(mesh):
    e = mesh.edges()
    lengths = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    return MeshStats(
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        h_max=float(lengths.max()),
        total_area=float(mesh.areas.sum()),
    )
