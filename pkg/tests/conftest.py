import numpy as np
import pytest
from hypothesis import settings

from blebsim.geometry import cube_sphere, octahedron
from blebsim.mesh import build_mesh

settings.register_profile("blebsim", deadline=None, max_examples=40)
settings.load_profile("blebsim")


@pytest.fixture(scope="session")
def octa():
    return octahedron()


@pytest.fixture(scope="session")
def sphere3():
    """Cube-sphere after three bisection passes (96 triangles)."""
    return cube_sphere(3)


@pytest.fixture
def square_patch():
    """Unit square split into two triangles; an open mesh."""
    v = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    t = [[0, 1, 2], [0, 2, 3]]
    return build_mesh(v, t, closed=False)


def random_triangle(rng, scale=1.0):
    """Three points in general position."""
    while True:
        p = rng.normal(size=(3, 3)) * scale
        if np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])) > 1e-2 * scale**2:
            return p


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
