"""Linear finite element assembly on a reference surface mesh.

All scalar matrices are ``scipy.sparse.csr_matrix`` of size N x N (N = number
of vertices) and act componentwise on 3-vector nodal fields stored as (N, 3)
arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import NegativeCoefficient

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0

# edge-midpoint quadrature: basis values at the three midpoints, weight area/3
_MIDPOINT_PHI = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def _scatter(mesh, local):
    """Assemble per-triangle (F, 3, 3) blocks into a global CSR matrix."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_mass(mesh):
    local = mesh.areas[:, None, None] * _LOCAL_MASS[None, :, :]
    return _scatter(mesh, local)


def assemble_stiffness(mesh):
    local = mesh.areas[:, None, None] * np.einsum("tik,tjk->tij", mesh.grads, mesh.grads)
    return _scatter(mesh, local)


def assemble_weighted_mass(mesh, nodal_coeff):
    """Mass matrix weighted by a nodal (linearly interpolated) coefficient.

    Integrated with the three-point edge-midpoint rule.
    """
    c = np.broadcast_to(np.asarray(nodal_coeff, dtype=float), (mesh.n_vertices,))
    if np.any(c < 0):
        raise NegativeCoefficient(f"coefficient must be >= 0 (min {c.min()})")
    c_tri = c[mesh.triangles]  # (F, 3)
    c_q = c_tri @ _MIDPOINT_PHI.T  # coefficient at each midpoint, (F, 3)
    # sum_q w_q c_q phi_i(q) phi_j(q)
    local = np.einsum("tq,qi,qj->tij", c_q, _MIDPOINT_PHI, _MIDPOINT_PHI)
    local *= (mesh.areas / 3.0)[:, None, None]
    return _scatter(mesh, local)


def lump(mass):
    """Row-sum lumped diagonal of a mass matrix."""
    return np.asarray(mass.sum(axis=1)).ravel()


def nodal_gradients(mesh, U):
    """Per-triangle constant gradient of a nodal 3-vector field.

    ``G[t, a, b]`` is the derivative of component ``a`` in direction ``b``.
    """
    U = np.asarray(U, dtype=float)
    return np.einsum("tka,tkb->tab", U[mesh.triangles], mesh.grads)


def tension_coefficients(mesh, U_prev, x0, epsilon=0.0, delta=1e-12):
    """Per-triangle factor sqrt(2) x0 / |grad U| (Frobenius norm).

    ``epsilon > 0`` uses the smoothed norm ``sqrt(|grad U|^2 + epsilon)``.
    """
    G = nodal_gradients(mesh, U_prev)
    norm2 = np.einsum("tab,tab->t", G, G)
    if epsilon > 0:
        denom = np.sqrt(norm2 + epsilon)
    else:
        denom = np.maximum(np.sqrt(norm2), delta)
    return np.sqrt(2.0) * x0 / denom, G


def assemble_tension_rhs(mesh, U_prev, x0, epsilon=0.0, coefficient=None):
    """Explicit tension load ``int c (grad U_prev) : grad phi_i``.

    Parameters
    ----------
    coefficient : callable, optional
        Maps the (F, 3, 3) gradient stack to per-triangle factors; overrides
        the default sqrt(2) x0 / |grad U| law.

    Returns
    -------
    (N, 3) array
    """
    if coefficient is None:
        c, G = tension_coefficients(mesh, U_prev, x0, epsilon)
    else:
        G = nodal_gradients(mesh, U_prev)
        c = np.asarray(coefficient(G), dtype=float)
    # b_i = sum_T c_T area_T G_T g_i
    local = np.einsum("tab,tib->tia", G, mesh.grads) * (c * mesh.areas)[:, None, None]
    b = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(b, mesh.triangles[:, k], local[:, k, :])
    return b


def volume(mesh, U):
    """Discrete enclosed volume ``max(int U . nu / 3, 0)`` over the reference mesh."""
    U = np.asarray(U, dtype=float)
    mean_u = U[mesh.triangles].mean(axis=1)
    v = np.sum(mesh.areas / 3.0 * np.einsum("ij,ij->i", mesh.normals, mean_u))
    return max(float(v), 0.0)


@dataclass(frozen=True)
class Operators:
    """Matrices that only depend on the reference mesh."""

    mass: sparse.csr_matrix
    stiffness: sparse.csr_matrix
    lumped: np.ndarray

    @classmethod
    def from_mesh(cls, mesh):
        M = assemble_mass(mesh)
        return cls(mass=M, stiffness=assemble_stiffness(mesh), lumped=lump(M))
