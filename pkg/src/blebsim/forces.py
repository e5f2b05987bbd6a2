"""Force laws of the membrane model and the pluggable force interface.

Three models are available through :func:`make_model`:

``sharp``
    Heaviside linker law, tension normalized by ``|grad u|``.
``regularized``
    Logistic smoothing of the Heaviside factors and epsilon-guarded
    denominators; Lipschitz in the displacement.
``manufactured``
    No tension, linear coupling ``k(a) = -3 a``. On the unit sphere the
    field ``exp(-t) * id`` solves the resulting problem exactly when the
    bending coefficient is one.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .assembly import assemble_tension_rhs, volume
from .errors import BadMode, InvariantViolation, MissingEpsilon

MODES = ("sharp", "regularized", "manufactured")
SHARP_DELTA = 1e-12
VOLUME_DELTA = 1e-10


@dataclass(frozen=True)
class ParamSet:
    """Non-dimensional model constants and time grid.

    Defaults are the standard parameter set for the discocyte geometry.
    """

    x0: float = 0.95
    lambda_b: float = 0.005
    lambda_l: float = 18.0
    l0: float = 0.04
    u_B: float = 0.056
    k_L: float = 500.0
    u_R: float = 0.0075
    lambda_p: float = 22.5
    epsilon: float = 0.0
    tau: float = 0.0025
    t_end: float = 2.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise InvariantViolation(f"{f.name} must be finite, got {value}")
            if value < 0:
                raise InvariantViolation(f"{f.name} must be >= 0, got {value}")
        if not 0 < self.u_R < self.l0 < self.u_B:
            raise InvariantViolation(
                f"need 0 < u_R < l0 < u_B, got u_R={self.u_R}, l0={self.l0}, u_B={self.u_B}"
            )
        if not self.tau > 0:
            raise InvariantViolation(f"tau must be > 0, got {self.tau}")
        if self.t_end < self.tau:
            raise InvariantViolation(f"t_end ({self.t_end}) must be >= tau ({self.tau})")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def n_steps(self):
        # guard against t_end / tau landing a hair above an integer
        return int(np.ceil(self.t_end / self.tau - 1e-9))


TABLE1 = ParamSet()
TABLE2 = ParamSet(
    x0=0.95, lambda_b=0.125, lambda_l=0.72, l0=0.2, u_B=0.28, k_L=500.0,
    u_R=0.15, lambda_p=150.0, tau=0.02, t_end=20.0,
)

PRESETS = {
    "table1": {},
    "weak-linkers": {"lambda_l": 12.0},
    "high-tension": {"x0": 0.85},
    "high-pressure": {"lambda_p": 30.0},
    "imgdata": {f.name: getattr(TABLE2, f.name) for f in dataclasses.fields(TABLE2)},
}


def _heaviside(r):
    return (np.asarray(r) >= 0).astype(float)


def lambda_coupling(dist, params, mode="sharp"):
    """Linker stiffness as a function of membrane-cortex distance."""
    d = np.asarray(dist, dtype=float)
    p = params
    if mode == "sharp":
        return p.lambda_l * (1.0 + p.k_L * _heaviside(p.u_R - d)) * _heaviside(p.u_B - d)
    if mode == "regularized":
        eps = _require_epsilon(p)
        # 1 / (1 + exp(2 (d - u) / eps)) == expit(-2 (d - u) / eps)
        repel = expit(-2.0 * (d - p.u_R) / eps)
        intact = expit(-2.0 * (d - p.u_B) / eps)
        return p.lambda_l * (1.0 + p.k_L * repel) * intact
    raise BadMode(f"no linker law for mode {mode!r}")


def coupling_target(U, uc, params, mode="sharp"):
    """Point at rest length ``l0`` from the cortex in the direction of ``U``.

    Works on single 3-vectors or (N, 3) arrays.
    """
    U = np.asarray(U, dtype=float)
    uc = np.asarray(uc, dtype=float)
    d = U - uc
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    if mode == "regularized":
        denom = norm + _require_epsilon(params)
    else:
        denom = np.maximum(norm, SHARP_DELTA)
    return uc + params.l0 * d / denom


def pressure_force(mesh, U_prev, params, mode="sharp"):
    """Nodal pressure load ``lambda_p / V(U_prev) * int nu_h phi_i``."""
    V = volume(mesh, U_prev)
    if mode == "regularized":
        scale = params.lambda_p / (V + _require_epsilon(params))
    else:
        scale = params.lambda_p / max(V, VOLUME_DELTA)
    load = np.zeros((mesh.n_vertices, 3))
    contrib = (scale * mesh.areas / 3.0)[:, None] * mesh.normals
    for k in range(3):
        np.add.at(load, mesh.triangles[:, k], contrib)
    return load


def _require_epsilon(params):
    if not params.epsilon > 0:
        raise MissingEpsilon("regularized mode needs epsilon > 0")
    return params.epsilon


class ForceModel:
    """Coupling and tension laws bundled for the time stepper.

    Attributes
    ----------
    mode : str
    params : ParamSet
    stiffness_factor : float
        Weight of the implicit ``s_h(U, Phi)`` part of the tension (1 for the
        membrane models, 0 when the tension law is identically zero).
    """

    def __init__(self, mode, params):
        if mode not in MODES:
            raise BadMode(f"unknown mode {mode!r}; expected one of {MODES}")
        if mode == "regularized":
            _require_epsilon(params)
        self.mode = mode
        self.params = params
        self.stiffness_factor = 0.0 if mode == "manufactured" else 1.0

    @property
    def law(self):
        return "regularized" if self.mode == "regularized" else "sharp"

    def coupling(self, a, uc=None):
        """Coupling force ``k(y, a)`` at positions ``a`` with cortex points ``uc``.

        Pressure is a global term and handled by :func:`pressure_force`.
        """
        a = np.asarray(a, dtype=float)
        if self.mode == "manufactured":
            return -3.0 * a
        dist = np.linalg.norm(a - uc, axis=-1)
        lam = lambda_coupling(dist, self.params, self.law)
        return -np.expand_dims(lam, -1) * (a - coupling_target(a, uc, self.params, self.law))

    def lambda_coupling(self, dist):
        return lambda_coupling(dist, self.params, self.law)

    def coupling_target(self, U, uc):
        return coupling_target(U, uc, self.params, self.law)

    def tension_coefficient(self, G):
        """Factor multiplying ``grad U`` in the explicit tension load, per triangle."""
        G = np.asarray(G, dtype=float)
        if self.mode == "manufactured":
            return np.zeros(G.shape[:-2])
        norm2 = np.einsum("...ab,...ab->...", G, G)
        if self.mode == "regularized":
            denom = np.sqrt(norm2 + self.params.epsilon)
        else:
            denom = np.maximum(np.sqrt(norm2), SHARP_DELTA)
        return np.sqrt(2.0) * self.params.x0 / denom

    def tension_rhs(self, mesh, U_prev):
        return assemble_tension_rhs(mesh, U_prev, self.params.x0, coefficient=self.tension_coefficient)

    def pressure(self, mesh, U_prev):
        if self.mode == "manufactured":
            return np.zeros((mesh.n_vertices, 3))
        return pressure_force(mesh, U_prev, self.params, self.law)

    def __repr__(self):
        return f"ForceModel(mode={self.mode!r})"


def make_model(mode, params):
    return ForceModel(mode, params)
