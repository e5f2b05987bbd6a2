"""Semi-implicit time stepping of the membrane model.

Per step the linear system for ``(U^{m+1}, W^{m+1})`` reads, coordinatewise,

    (M/tau + M_lam + S) U + lambda_b S W = M U^m / tau + b_tension(U^m)
                                          + M_lam target(U^m) + b_pressure(U^m)
    S U - M W = 0

where ``M_lam`` is the mass matrix weighted by the linker stiffness evaluated
at ``U^m``. All nonlinear data is frozen at the old level.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import Operators, assemble_weighted_mass
from .errors import NoConvergence, SolverFailure
from .geometry import build_cortex
from .solver import INNER_TOL, StepSystem, cg_solve, jacobi_precond, schur_step_solve

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8


def _frozen(a):
    a = np.array(a, dtype=a.dtype if isinstance(a, np.ndarray) else float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SimState:
    """Snapshot of the discrete solution after ``step`` time steps."""

    step: int
    tau: float
    U: np.ndarray
    W: np.ndarray
    cortex: np.ndarray
    u_B: float
    residual: float = 0.0
    dist: np.ndarray = field(init=False)
    linker_intact: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("U", "W", "cortex"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        dist = np.linalg.norm(self.U - self.cortex, axis=1)
        object.__setattr__(self, "dist", _frozen(dist))
        object.__setattr__(self, "linker_intact", _frozen(dist <= self.u_B))

    @property
    def time(self):
        return self.step * self.tau

    def advance(self, U, W, residual):
        return SimState(self.step + 1, self.tau, U, W, self.cortex, self.u_B, residual)


def initial_state(mesh, params, cortex=None, ops=None):
    """State at t = 0: ``U`` is the identity, ``W = M^{-1} S U``."""
    if cortex is None:
        cortex = build_cortex(mesh, params.l0)
    ops = ops or Operators.from_mesh(mesh)
    U0 = mesh.vertices.copy()
    W0 = cg_solve(ops.mass.dot, ops.stiffness @ U0, jacobi_precond(ops.mass),
                  rel_tol=INNER_TOL).x
    return SimState(0, params.tau, U0, W0, cortex, params.u_B)


def build_step_system(state, mesh, model, params, ops=None):
    ops = ops or Operators.from_mesh(mesh)
    M, S = ops.mass, ops.stiffness
    U = state.U
    tau = params.tau
    rhs = M @ U / tau
    A = M / tau
    if model.stiffness_factor:
        A = A + model.stiffness_factor * S
    if model.mode == "manufactured":
        rhs = rhs - M @ model.coupling(U)
    else:
        lam = model.lambda_coupling(state.dist)
        M_lam = assemble_weighted_mass(mesh, lam)
        A = A + M_lam
        rhs = rhs + M_lam @ model.coupling_target(U, state.cortex)
        rhs = rhs + model.tension_rhs(mesh, U)
        rhs = rhs + model.pressure(mesh, U)
    return StepSystem(A=A.tocsr(), S=S, M=M, M_L=ops.lumped, lambda_b=params.lambda_b, rhs=rhs)


def time_step(state, mesh, model, params, ops=None, lumped=False):
    """Advance one step; raises :class:`SolverFailure` on solver trouble."""
    system = build_step_system(state, mesh, model, params, ops)
    try:
        result = schur_step_solve(system, x0=state.U, lumped=lumped)
    except NoConvergence as exc:
        raise SolverFailure(f"step {state.step + 1}: {exc}", step=state.step + 1) from exc
    if not (np.all(np.isfinite(result.U)) and np.all(np.isfinite(result.W))):
        raise SolverFailure(f"step {state.step + 1}: non-finite solution", step=state.step + 1)
    if result.residual > RESIDUAL_TOL:
        raise SolverFailure(
            f"step {state.step + 1}: block residual {result.residual:.3e} > {RESIDUAL_TOL}",
            step=state.step + 1,
        )
    return state.advance(result.U, result.W, result.residual)


def run(mesh, model, params, output_hook=None, output_every=40, cortex=None, lumped=False,
        state=None):
    """Run ``params.n_steps`` steps and return the final state.

    ``output_hook(step, time, mesh, U, W, linker_intact, dist)`` is called for
    the initial state, every ``output_every`` steps and after the final step.
    On solver failure the last good state is handed to the hook before the
    error propagates.
    """
    if output_every < 1:
        raise ValueError("output_every must be >= 1")
    ops = Operators.from_mesh(mesh)
    if state is None:
        state = initial_state(mesh, params, cortex, ops)
    n_steps = params.n_steps
    emitted = -1

    def emit(s):
        nonlocal emitted
        if output_hook is not None and emitted != s.step:
            output_hook(s.step, s.time, mesh, s.U, s.W, s.linker_intact, s.dist)
        emitted = s.step

    emit(state)
    logger.info("running %d steps (tau=%g, mode=%s, N=%d)", n_steps, params.tau, model.mode,
                mesh.n_vertices)
    for _ in range(n_steps):
        t0 = time.perf_counter()
        try:
            state = time_step(state, mesh, model, params, ops, lumped)
        except SolverFailure:
            emit(state)
            raise
        logger.info("step %d t=%.6g residual=%.3e broken=%d wall=%.3fs", state.step, state.time,
                    state.residual, int(np.sum(~state.linker_intact)),
                    time.perf_counter() - t0)
        if state.step % output_every == 0 or state.step == n_steps:
            emit(state)
    return state
