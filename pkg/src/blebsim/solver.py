"""Conjugate gradients and the per-step saddle-point solve.

Each time step couples displacement ``U`` and curvature ``W`` through::

    A U + lambda_b S W = b
    S U -          M W = 0

Eliminating ``W = M^{-1} S U`` gives the SPD Schur system
``(A + lambda_b S M^{-1} S) U = b``, solved with preconditioned CG. The three
coordinates share every matrix and are solved together as the columns of an
(N, 3) block.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .errors import NoConvergence, ZeroDiagonal

logger = logging.getLogger(__name__)

OUTER_TOL = 1e-10
INNER_TOL = 1e-12
PRECOND_TOL = 1e-4


class CGResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float


def _col_dot(a, b):
    # one BLAS dot per column beats einsum and (a * b).sum(0) on tall blocks
    return np.array([a[:, k] @ b[:, k] for k in range(a.shape[1])])


def _col_norm(a):
    return np.sqrt(_col_dot(a, a))


def cg_solve(apply_operator, b, precond=None, rel_tol=OUTER_TOL, max_iter=None, x0=None,
             callback=None, stage="cg", flexible=False):
    """Preconditioned conjugate gradients.

    ``b`` may be a vector or an (N, k) block; columns are independent systems
    sharing the operator. Iteration stops once every column satisfies
    ``||b - Op x|| <= rel_tol ||b||``.

    Parameters
    ----------
    apply_operator : callable
        Applies the SPD operator to an array shaped like ``b``.
    precond : callable, optional
        Applies an SPD approximation of the inverse.
    callback : callable, optional
        Called as ``callback(iteration, x, r)`` after every update.
    flexible : bool
        Use the Polak-Ribiere update for ``beta``; tolerates preconditioners
        that are themselves inexact iterative solves.

    Raises
    ------
    NoConvergence
        ``max_iter`` reached, or a non-positive curvature ``p^T Op p`` was met
        (operator not SPD).
    """
    b = np.asarray(b, dtype=float)
    vector = b.ndim == 1
    B = b[:, None] if vector else b
    n = B.shape[0]
    if max_iter is None:
        max_iter = 10 * max(n, 1)

    def op(v):
        out = apply_operator(v[:, 0] if vector else v)
        return np.asarray(out, dtype=float).reshape(v.shape)

    def pc(v):
        if precond is None:
            return v.copy()
        out = precond(v[:, 0] if vector else v)
        return np.asarray(out, dtype=float).reshape(v.shape)

    bnorm = _col_norm(B)
    if x0 is None:
        X = np.zeros_like(B)
        R = B.copy()
    else:
        X = np.array(x0, dtype=float).reshape(B.shape)
        R = B - op(X)
    target = rel_tol * bnorm

    def finish(X, R, it):
        rnorm = _col_norm(R)
        rel = np.where(bnorm > 0, rnorm / np.where(bnorm > 0, bnorm, 1.0), rnorm)
        x = X[:, 0] if vector else X
        return CGResult(x, it, float(rel.max()) if rel.size else 0.0)

    active = _col_norm(R) > target
    if not active.any():
        return finish(X, R, 0)
    Z = pc(R)
    P = Z.copy()
    rz = _col_dot(R, Z)
    for it in range(1, max_iter + 1):
        Q = op(P)
        pq = _col_dot(P, Q)
        if np.any(active & ~(pq > 0)):
            res = finish(X, R, it)
            raise NoConvergence(
                f"{stage}: CG breakdown, p^T A p = {pq[active].min():.3e} (operator not SPD)",
                residual=res.residual, iterations=it, stage=stage,
            )
        alpha = np.where(active, rz / np.where(active, pq, 1.0), 0.0)
        X += alpha * P
        Q *= alpha
        R -= Q
        if callback is not None:
            callback(it, X[:, 0] if vector else X, R[:, 0] if vector else R)
        active = _col_norm(R) > target
        if not active.any():
            return finish(X, R, it)
        Z_old = Z
        Z = pc(R)
        rz_new = _col_dot(R, Z)
        num = rz_new - _col_dot(R, Z_old) if flexible else rz_new
        beta = np.where(active, num / np.where(rz != 0, rz, 1.0), 0.0)
        rz = rz_new
        P *= beta
        P += Z
    res = finish(X, R, max_iter)
    raise NoConvergence(
        f"{stage}: no convergence in {max_iter} iterations (relative residual {res.residual:.3e})",
        residual=res.residual, iterations=max_iter, stage=stage,
    )


def jacobi_precond(A):
    """Diagonal scaling ``v -> v / diag(A)``; works on vectors and (N, k) blocks."""
    d = A.diagonal() if sparse.issparse(A) else np.diag(np.asarray(A))
    d = np.asarray(d, dtype=float)
    if np.any(d == 0):
        raise ZeroDiagonal(f"zero diagonal entry at row {int(np.flatnonzero(d == 0)[0])}")
    inv = 1.0 / d

    def apply(v):
        return inv[:, None] * v if v.ndim == 2 else inv * v

    return apply


@dataclass
class StepSystem:
    """Per-step linear system shared by the three coordinates.

    Attributes
    ----------
    A : csr_matrix
        ``M / tau + M_lambda + S`` (stiffness weighted by the model's factor).
    S, M : csr_matrix
        Stiffness and consistent mass.
    M_L : ndarray
        Lumped mass diagonal.
    lambda_b : float
    rhs : (N, 3) ndarray
    """

    A: sparse.csr_matrix
    S: sparse.csr_matrix
    M: sparse.csr_matrix
    M_L: np.ndarray
    lambda_b: float
    rhs: np.ndarray


class StepResult(NamedTuple):
    U: np.ndarray
    W: np.ndarray
    iterations: int
    residual: float


class _MassInverse:
    def __init__(self, M, M_L, lumped):
        self.M = M
        self.inv_lumped = 1.0 / M_L
        self.lumped = lumped
        self.precond = jacobi_precond(M)
        self.inner_iterations = 0

    def __call__(self, v):
        if self.lumped:
            return self.inv_lumped[:, None] * v if v.ndim == 2 else self.inv_lumped * v
        res = cg_solve(self.M.dot, v, self.precond, rel_tol=INNER_TOL, stage="inner")
        self.inner_iterations += res.iterations
        return res.x


def block_residual(sys, U, W, lumped=False):
    """Relative residuals of the two block equations.

    With ``lumped=True`` the second equation uses the lumped mass, i.e. the
    system the fast mode actually solves.
    """
    r1 = sys.A @ U + sys.lambda_b * (sys.S @ W) - sys.rhs
    SU = sys.S @ U
    MW = (sys.M_L[:, None] * W if W.ndim == 2 else sys.M_L * W) if lumped else sys.M @ W
    r2 = SU - MW
    n1 = np.linalg.norm(sys.rhs)
    n2 = max(np.linalg.norm(SU), np.linalg.norm(MW))
    e1 = np.linalg.norm(r1) / n1 if n1 > 0 else np.linalg.norm(r1)
    e2 = np.linalg.norm(r2) / n2 if n2 > 0 else np.linalg.norm(r2)
    return float(e1), float(e2)


class _ShiftedLaplacePrecond:
    """Approximate inverse of the Schur operator.

    With ``beta = 1^T A 1 / 1^T M 1`` (the mass-like part of ``A``; the
    stiffness annihilates constants) the Schur operator is spectrally
    equivalent to ``lambda_b (S + a M) M^{-1} (S + a M)`` with
    ``a = sqrt(beta / lambda_b)``, whose inverse costs two CG solves with
    the well conditioned shifted Laplacian ``S + a M``.
    """

    def __init__(self, sys, mass, mass_apply, rel_tol=PRECOND_TOL):
        ones = np.ones(sys.A.shape[0])
        beta = float(ones @ (sys.A @ ones)) / float(ones @ (mass @ ones))
        self.alpha = np.sqrt(beta / sys.lambda_b)
        self.shifted = (sys.S + self.alpha * mass).tocsr()
        self.jacobi = jacobi_precond(self.shifted)
        self.mass_apply = mass_apply
        self.lambda_b = sys.lambda_b
        self.rel_tol = rel_tol
        self.iterations = 0

    def _solve(self, v):
        res = cg_solve(self.shifted.dot, v, self.jacobi, rel_tol=self.rel_tol, stage="precond")
        self.iterations += res.iterations
        return res.x

    def __call__(self, v):
        return self._solve(self.mass_apply(self._solve(v))) / self.lambda_b


def schur_step_solve(sys, x0=None, lumped=False, rel_tol=OUTER_TOL, max_iter=None):
    """Solve the coupled (U, W) system by CG on the Schur complement.

    ``lumped=True`` replaces every ``M^{-1}`` by the inverse of the lumped mass
    diagonal (fast mode); otherwise ``M^{-1}`` is an inner CG solve with the
    consistent mass matrix.
    """
    minv = _MassInverse(sys.M, sys.M_L, lumped)
    lam = sys.lambda_b
    n = sys.A.shape[0]
    if max_iter is None:
        max_iter = 10 * n

    if lam == 0:
        res = cg_solve(sys.A.dot, sys.rhs, jacobi_precond(sys.A), rel_tol=rel_tol,
                       max_iter=max_iter, x0=x0, stage="outer")
        precond_its = 0
    else:
        def operator(v):
            return sys.A @ v + lam * (sys.S @ minv(sys.S @ v))

        mass = sparse.diags(sys.M_L).tocsr() if lumped else sys.M
        precond = _ShiftedLaplacePrecond(sys, mass, mass.dot)
        res = cg_solve(operator, sys.rhs, precond, rel_tol=rel_tol, max_iter=max_iter,
                       x0=x0, stage="outer", flexible=True)
        precond_its = precond.iterations
    U = res.x
    W = minv(sys.S @ U)
    e1, e2 = block_residual(sys, U, W, lumped)
    logger.debug("schur solve: %d outer, %d inner, %d precond iterations; residuals %.2e %.2e",
                 res.iterations, minv.inner_iterations, precond_its, e1, e2)
    return StepResult(U, W, res.iterations, max(e1, e2))
