import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from blebsim.assembly import volume
from blebsim.errors import BadMode, InvariantViolation, MissingEpsilon
from blebsim.forces import (
    PRESETS,
    TABLE1,
    TABLE2,
    ParamSet,
    coupling_target,
    lambda_coupling,
    make_model,
    pressure_force,
)
from blebsim.geometry import cube_sphere, make_discocyte
from blebsim.mesh import vertex_normals

REG = TABLE1.replace(epsilon=1e-5)
vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def test_table1_defaults():
    p = ParamSet()
    assert (p.x0, p.lambda_b, p.lambda_l, p.l0) == (0.95, 0.005, 18.0, 0.04)
    assert (p.u_B, p.k_L, p.u_R, p.lambda_p) == (0.056, 500.0, 0.0075, 22.5)
    assert (p.tau, p.t_end, p.epsilon) == (0.0025, 2.0, 0.0)


def test_table2_values():
    p = TABLE2
    assert (p.x0, p.lambda_b, p.lambda_l, p.l0) == (0.95, 0.125, 0.72, 0.2)
    assert (p.u_B, p.k_L, p.u_R, p.lambda_p) == (0.28, 500.0, 0.15, 150.0)
    assert (p.tau, p.t_end) == (0.02, 20.0)
    assert PRESETS["imgdata"]["lambda_p"] == 150.0


def test_step_counts():
    assert TABLE1.n_steps == 800
    assert TABLE2.n_steps == 1000
    assert TABLE1.replace(t_end=TABLE1.tau).n_steps == 1
    assert ParamSet(tau=0.1, t_end=0.3).n_steps == 3


@pytest.mark.parametrize("changes", [
    {"u_R": 0.5}, {"u_B": 0.03}, {"tau": 0.0}, {"tau": -1.0}, {"lambda_l": -1.0},
    {"t_end": 0.001}, {"x0": float("nan")},
])
def test_invariants(changes):
    with pytest.raises(InvariantViolation):
        ParamSet(**changes)


def test_sharp_linker_law():
    assert lambda_coupling(0.04, TABLE1) == 18.0
    assert lambda_coupling(0.06, TABLE1) == 0.0
    assert lambda_coupling(0.005, TABLE1) == 9018.0
    # H(0) = 1 at both thresholds
    assert lambda_coupling(TABLE1.u_B, TABLE1) == 18.0
    assert lambda_coupling(TABLE1.u_R, TABLE1) == 9018.0


def test_regularized_midpoint():
    lam = lambda_coupling(REG.u_B, REG, "regularized")
    assert lam == pytest.approx(18.0 * 0.5, rel=1e-12)


def test_regularized_matches_sharp_outside_band():
    for d in (REG.u_B - 10 * REG.epsilon, REG.u_B + 10 * REG.epsilon):
        assert abs(lambda_coupling(d, REG, "regularized") - lambda_coupling(d, TABLE1)) < 1e-6
    # at the repulsion threshold the logistic tail is amplified by lambda_l k_L = 9000
    tail = REG.lambda_l * REG.k_L * (1 / (1 + math.exp(20)))
    for d in (REG.u_R - 10 * REG.epsilon, REG.u_R + 10 * REG.epsilon):
        diff = abs(lambda_coupling(d, REG, "regularized") - lambda_coupling(d, TABLE1))
        assert diff == pytest.approx(tail, rel=1e-6)
    grid = np.linspace(0, 0.1, 1000)
    away = (np.abs(grid - REG.u_B) > 10 * REG.epsilon) & (np.abs(grid - REG.u_R) > 12 * REG.epsilon)
    diff = lambda_coupling(grid, REG, "regularized") - lambda_coupling(grid, TABLE1)
    assert np.abs(diff[away]).max() < 1e-6


@pytest.mark.parametrize("mode,params", [("sharp", TABLE1), ("regularized", REG),
                                         ("regularized", TABLE1.replace(epsilon=1e-2))])
def test_linker_law_non_increasing(mode, params):
    lam = lambda_coupling(np.linspace(0, 0.2, 1000), params, mode)
    assert np.all(np.diff(lam) <= 1e-12)


def test_linker_law_bad_mode():
    with pytest.raises(BadMode):
        lambda_coupling(0.1, TABLE1, "manufactured")
    with pytest.raises(MissingEpsilon):
        lambda_coupling(0.1, TABLE1, "regularized")


def test_coupling_target_examples():
    np.testing.assert_allclose(coupling_target([0.08, 0, 0], [0, 0, 0], TABLE1), [0.04, 0, 0])
    u = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(coupling_target(u, u, TABLE1), u)
    uc = np.array([0.5, 0.5, 0.5])
    at_rest = uc + TABLE1.l0 * np.array([0.0, 0.6, 0.8])
    np.testing.assert_allclose(coupling_target(at_rest, uc, TABLE1), at_rest, atol=1e-15)


@given(vec3, vec3, st.floats(1e-3, 1e3))
def test_coupling_target_on_ray(uc, d, s):
    assume(np.linalg.norm(d) > 1e-6)
    target = coupling_target(uc + s * d, uc, TABLE1)
    expected = uc + TABLE1.l0 * d / np.linalg.norm(d)
    np.testing.assert_allclose(target, expected, atol=1e-9)


def test_coupling_target_vectorized():
    U = np.array([[0.08, 0, 0], [0, 0.02, 0]])
    out = coupling_target(U, np.zeros((2, 3)), TABLE1)
    np.testing.assert_allclose(out, [[0.04, 0, 0], [0, 0.04, 0]])


def test_manufactured_coupling():
    model = make_model("manufactured", TABLE1)
    np.testing.assert_array_equal(model.coupling(np.array([1.0, 2.0, 3.0])), [-3, -6, -9])


@given(vec3, vec3)
def test_manufactured_coupling_lipschitz_three(a, b):
    k = make_model("manufactured", TABLE1).coupling
    assert np.linalg.norm(k(a) - k(b)) == pytest.approx(3 * np.linalg.norm(a - b), abs=1e-9)


@given(st.lists(st.floats(-0.1, 0.1), min_size=6, max_size=6))
def test_regularized_coupling_lipschitz(xs):
    params = TABLE1.replace(epsilon=1e-2)
    k = make_model("regularized", params).coupling
    uc = np.zeros(3)
    a, b = np.array(xs[:3]), np.array(xs[3:])
    assume(np.linalg.norm(a - b) > 1e-9)
    # crude global bound from the derivative of each factor
    lam_max = params.lambda_l * (1 + params.k_L)
    bound = lam_max * (1 + params.l0 / params.epsilon) + lam_max * (4 / params.epsilon) * 0.3
    assert np.linalg.norm(k(a, uc) - k(b, uc)) <= bound * np.linalg.norm(a - b)


def test_sharp_coupling_is_spring_towards_target():
    model = make_model("sharp", TABLE1)
    a = np.array([0.05, 0, 0])
    np.testing.assert_allclose(model.coupling(a, np.zeros(3)), [-18 * 0.01, 0, 0])


def test_pressure_zero():
    mesh = cube_sphere(2)
    assert not pressure_force(mesh, mesh.vertices, TABLE1.replace(lambda_p=0.0)).any()


def test_pressure_net_force_cancels():
    mesh = cube_sphere(10)
    load = pressure_force(mesh, mesh.vertices, TABLE1)
    assert np.abs(load.sum(axis=0)).max() <= 1e-3 * np.abs(load).sum()


def test_pressure_density_on_discocyte():
    mesh = make_discocyte(6)
    load = pressure_force(mesh, mesh.vertices, TABLE1)
    density = np.sum(load * vertex_normals(mesh)) / mesh.areas.sum()
    # vertex normals differ from the face normals on the curved rim
    assert density == pytest.approx(22.5 / volume(mesh, mesh.vertices), rel=0.03)
    assert density == pytest.approx(0.15, rel=0.05)


def test_pressure_regularized_denominator():
    mesh = cube_sphere(2)
    params = TABLE1.replace(epsilon=0.5)
    V = volume(mesh, mesh.vertices)
    reg = pressure_force(mesh, mesh.vertices, params, "regularized")
    sharp = pressure_force(mesh, mesh.vertices, TABLE1)
    np.testing.assert_allclose(reg, sharp * V / (V + 0.5), rtol=1e-12, atol=1e-15)


def test_pressure_guarded_at_zero_volume():
    mesh = cube_sphere(1)
    load = pressure_force(mesh, np.zeros_like(mesh.vertices), TABLE1)
    assert np.all(np.isfinite(load))


def test_model_construction():
    with pytest.raises(BadMode):
        make_model("soft", TABLE1)
    with pytest.raises(MissingEpsilon):
        make_model("regularized", TABLE1)
    assert make_model("sharp", TABLE1).stiffness_factor == 1.0
    assert make_model("manufactured", TABLE1).stiffness_factor == 0.0


def test_tension_coefficient():
    G = np.broadcast_to(np.eye(3), (4, 3, 3))
    sharp = make_model("sharp", TABLE1).tension_coefficient(G)
    np.testing.assert_allclose(sharp, math.sqrt(2) * 0.95 / math.sqrt(3))
    reg = make_model("regularized", TABLE1.replace(epsilon=1.0)).tension_coefficient(G)
    np.testing.assert_allclose(reg, math.sqrt(2) * 0.95 / 2.0)
    assert not make_model("manufactured", TABLE1).tension_coefficient(G).any()
    # a collapsed gradient is guarded
    assert np.isfinite(make_model("sharp", TABLE1).tension_coefficient(np.zeros((1, 3, 3)))).all()


def test_manufactured_ignores_membrane_forces():
    mesh = cube_sphere(2)
    model = make_model("manufactured", TABLE1)
    assert not model.pressure(mesh, mesh.vertices).any()
    assert not model.tension_rhs(mesh, mesh.vertices).any()
