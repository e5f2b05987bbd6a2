"""Surface finite element simulation of membrane blebbing.

The membrane is a triangulated closed surface displaced by tension, bending,
cortex linkers and pressure; each time step solves a coupled linear system for
displacement and curvature.
"""

from .errors import BlebsimError
from .forces import PRESETS, TABLE1, TABLE2, ForceModel, ParamSet, make_model
from .geometry import build_cortex, cube_sphere, make_discocyte, octahedron
from .mesh import SurfaceMesh, build_mesh, refine_bisect, stats
from .sim import SimState, initial_state, run, time_step

__all__ = [
    "BlebsimError", "ForceModel", "PRESETS", "ParamSet", "SimState", "SurfaceMesh",
    "TABLE1", "TABLE2", "build_cortex", "build_mesh", "cube_sphere", "initial_state",
    "make_discocyte", "make_model", "octahedron", "refine_bisect", "run", "stats", "time_step",
]

__version__ = "0.1.0"
