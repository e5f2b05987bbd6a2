"""Verification harness.

* dense direct solve of the per-step block system (oracle for the Schur CG),
* manufactured-solution convergence on the unit sphere,
* geometric convergence of area and enclosed volume,
* exact algebraic identities of the assembled operators.

Convergence levels are uniform refinement levels: level ``l`` is the
cube-sphere after ``2 l`` bisection passes, so the mesh size halves from one
level to the next.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import Operators, assemble_tension_rhs, volume
from .errors import SingularSystem
from .forces import ParamSet, make_model
from .geometry import cube_sphere
from .mesh import stats
from .sim import SimState, build_step_system, time_step

logger = logging.getLogger(__name__)

PASSES_PER_LEVEL = 2
MAX_ORACLE_VERTICES = 500


def sphere_level(level):
    return cube_sphere(PASSES_PER_LEVEL * level)


@dataclass
class EocReport:
    """Errors per level and the observed orders between consecutive levels.

    ``eoc[name][i] = log(e_i / e_{i+1}) / log(h_i / h_{i+1})``, which equals
    ``log2(e_i / e_{i+1})`` when the mesh size halves.
    """

    levels: list
    h_max: list
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")

    def eoc(self, name):
        e = np.asarray(self.errors[name], dtype=float)
        h = np.asarray(self.h_max, dtype=float)
        return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))

    def rows(self):
        names = list(self.errors)
        eocs = {n: [float("nan")] + self.eoc(n) for n in names}
        for i, level in enumerate(self.levels):
            yield (level, self.h_max[i], *[self.errors[n][i] for n in names],
                   *[eocs[n][i] for n in names])

    def to_csv(self):
        names = list(self.errors)
        header = ["level", "h_max"] + [f"error_{n}" for n in names] + [f"eoc_{n}" for n in names]
        lines = [",".join(header)]
        for row in self.rows():
            lines.append(",".join([str(row[0])] + [f"{x:.10g}" for x in row[1:]]))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- oracle


def dense_solve(system, pivot_rtol=1e-12):
    """Solve the 2N x 2N block system ``[[A, lb S], [S, -M]]`` densely.

    LU with partial pivoting; a pivot below ``pivot_rtol`` times the largest
    one is reported as :class:`SingularSystem`.
    """
    A = system.A.toarray()
    S = system.S.toarray()
    M = system.M.toarray()
    n = A.shape[0]
    K = np.block([[A, system.lambda_b * S], [S, -M]])
    lu, piv = scipy.linalg.lu_factor(K, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if not pivots.min() > pivot_rtol * pivots.max():
        raise SingularSystem(
            f"block system is singular (pivot ratio {pivots.min() / pivots.max():.2e})"
        )
    rhs = np.vstack([system.rhs, np.zeros_like(system.rhs)])
    sol = scipy.linalg.lu_solve((lu, piv), rhs)
    return sol[:n], sol[n:]


def dense_oracle_step(state, mesh, model, params):
    if mesh.n_vertices > MAX_ORACLE_VERTICES:
        raise ValueError(f"dense oracle limited to {MAX_ORACLE_VERTICES} vertices")
    return dense_solve(build_step_system(state, mesh, model, params))


# ---------------------------------------------------------------- manufactured


def mass_norm(M, V):
    """``sqrt(sum_c V_c^T M V_c)`` for an (N, 3) field."""
    return math.sqrt(max(float(np.sum(V * (M @ V))), 0.0))


def manufactured_run(mesh, tau, t_end=0.1, lumped=False):
    """Evolve the manufactured problem and measure errors.

    Returns ``(error_u, error_w)``: the maximum over steps of the mass-norm
    error of ``U`` against ``exp(-t) y`` and the discrete L2-in-time mass-norm
    error of ``W`` against ``2 exp(-t) y``, both at the mesh vertices.
    """
    params = ParamSet(lambda_b=1.0, tau=tau, t_end=max(t_end, tau))
    model = make_model("manufactured", params)
    ops = Operators.from_mesh(mesh)
    y = mesh.vertices
    state = SimState(0, tau, y.copy(), 2.0 * y, y.copy(), params.u_B)
    err_u = 0.0
    err_w2 = 0.0
    for _ in range(params.n_steps):
        state = time_step(state, mesh, model, params, ops, lumped)
        decay = math.exp(-state.time)
        err_u = max(err_u, mass_norm(ops.mass, state.U - decay * y))
        err_w2 += tau * mass_norm(ops.mass, state.W - 2.0 * decay * y) ** 2
    return err_u, math.sqrt(err_w2)


def manufactured_convergence(levels, tau_factor=2.0, t_end=0.1, lumped=False):
    """Convergence study with ``tau = tau_factor * h_max**2`` on each level."""
    levels = list(levels)
    h, eu, ew = [], [], []
    for level in levels:
        mesh = sphere_level(level)
        hmax = stats(mesh).h_max
        tau = tau_factor * hmax**2
        # land exactly on t_end
        n = max(1, math.ceil(t_end / tau))
        u, w = manufactured_run(mesh, t_end / n, t_end, lumped)
        logger.info("manufactured level %d: h=%.4g steps=%d err_u=%.4e err_w=%.4e",
                    level, hmax, n, u, w)
        h.append(hmax)
        eu.append(u)
        ew.append(w)
    return EocReport(levels, h, {"u": eu, "w": ew})


# ---------------------------------------------------------------- geometry


def geometric_convergence(levels):
    levels = list(levels)
    h, ea, ev, areas = [], [], [], []
    for level in levels:
        mesh = sphere_level(level)
        s = stats(mesh)
        h.append(s.h_max)
        areas.append(s.total_area)
        ea.append(abs(s.total_area - 4.0 * math.pi))
        ev.append(abs(volume(mesh, mesh.vertices) - 4.0 * math.pi / 3.0))
    report = EocReport(levels, h, {"area": ea, "volume": ev})
    report.areas = areas
    return report


# ---------------------------------------------------------------- identities


@dataclass
class IdentityReport:
    checks: dict

    @property
    def passed(self):
        return all(ok for ok, _, _ in self.checks.values())

    def lines(self):
        for name, (ok, value, tol) in self.checks.items():
            yield f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (tol {tol:.0e})"


def identity_suite(mesh):
    """Exact algebraic identities every valid mesh must satisfy.

    * total mass equals total area,
    * constants are in the kernel of the stiffness matrix,
    * ``sum_c id_c^T S id_c = 2 * area`` (the tangential projection has norm sqrt 2),
    * with ``x0 = 1`` the explicit tension load balances the implicit
      Laplacian of the identity, so the membrane starts at rest.
    """
    ops = Operators.from_mesh(mesh)
    M, S = ops.mass, ops.stiffness
    area = float(mesh.areas.sum())
    ident = mesh.vertices
    ones = np.ones(mesh.n_vertices)
    S_id = S @ ident
    scale = max(np.abs(S.data).max(), 1.0)
    checks = {}

    def record(name, value, tol):
        checks[name] = (bool(value <= tol), float(value), tol)

    record("mass_sum_equals_area", abs(M.sum() - area) / area, 1e-12)
    record("stiffness_kernel", np.abs(S @ ones).max() / scale, 1e-10)
    record("dirichlet_energy_of_identity", abs(np.sum(ident * S_id) - 2.0 * area) / (2.0 * area), 1e-12)
    rest = S_id - assemble_tension_rhs(mesh, ident, x0=1.0)
    record("tension_at_rest", np.abs(rest).max() / max(np.abs(S_id).max(), 1.0), 1e-10)
    return IdentityReport(checks)
