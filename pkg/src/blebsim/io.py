"""Mesh files, run configuration and VTK snapshots.

Mesh formats
    OFF: ``OFF`` header, ``V F E`` counts, V coordinate lines, F lines
    ``3 i j k`` with zero-based indices. OBJ: ``v x y z`` and ``f i j k`` with
    one-based indices (``i/t/n`` forms accepted); triangles only.

Configuration
    ``key = value`` lines, ``#`` starts a comment, unknown keys are errors.
"""

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadValue, InvariantViolation, IoError, ParseError, UnknownKey, UnsupportedFace
from .forces import MODES, PRESETS, ParamSet
from .mesh import build_mesh

logger = logging.getLogger(__name__)

_PARAM_KEYS = tuple(f.name for f in dataclasses.fields(ParamSet))


# ---------------------------------------------------------------- meshes


def _content_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def _floats(tokens, lineno, what):
    try:
        return [float(x) for x in tokens]
    except ValueError:
        raise ParseError(f"bad {what}: {' '.join(tokens)!r}", lineno) from None


def _read_off(path):
    lines = _content_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty file") from None
    tokens = header.split()
    if tokens[0] != "OFF":
        raise ParseError(f"expected 'OFF' header, got {tokens[0]!r}", lineno)
    tokens = tokens[1:]
    if not tokens:
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise ParseError("missing counts line") from None
        tokens = line.split()
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
    except (ValueError, IndexError):
        raise ParseError(f"bad counts line {' '.join(tokens)!r}", lineno) from None
    verts, faces = [], []
    for lineno, line in lines:
        parts = line.split()
        if len(verts) < nv:
            if len(parts) < 3:
                raise ParseError("vertex line needs 3 coordinates", lineno)
            verts.append(_floats(parts[:3], lineno, "vertex"))
        elif len(faces) < nf:
            try:
                count = int(parts[0])
                idx = [int(x) for x in parts[1:1 + count]]
            except (ValueError, IndexError):
                raise ParseError(f"bad face line {line!r}", lineno) from None
            if count != 3:
                raise UnsupportedFace(f"face with {count} vertices (triangles only)", lineno)
            if len(idx) != 3:
                raise ParseError("face line shorter than its vertex count", lineno)
            faces.append(idx)
        else:
            raise ParseError("trailing data after faces", lineno)
    if len(verts) != nv or len(faces) != nf:
        raise ParseError(f"expected {nv} vertices and {nf} faces, found {len(verts)} and {len(faces)}")
    return verts, faces


def _read_obj(path):
    verts, faces = [], []
    for lineno, line in _content_lines(path):
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise ParseError("vertex line needs 3 coordinates", lineno)
            verts.append(_floats(parts[1:4], lineno, "vertex"))
        elif parts[0] == "f":
            if len(parts) != 4:
                raise UnsupportedFace(f"face with {len(parts) - 1} vertices (triangles only)", lineno)
            try:
                idx = [int(p.split("/")[0]) for p in parts[1:]]
            except ValueError:
                raise ParseError(f"bad face line {line!r}", lineno) from None
            # negative indices count from the end of the vertex list
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            faces.append(idx)
    return verts, faces


def read_mesh(path, closed=True):
    """Read an ``.off`` or ``.obj`` triangle mesh and validate it."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".off":
        verts, faces = _read_off(path)
    elif suffix == ".obj":
        verts, faces = _read_obj(path)
    else:
        raise ParseError(f"unsupported mesh format {suffix!r} (expected .off or .obj)")
    if not faces:
        raise ParseError("mesh has no faces")
    nv = len(verts)
    for f in faces:
        if min(f) < 0 or max(f) >= nv:
            raise ParseError(f"face {f} references a missing vertex")
    return build_mesh(np.array(verts, dtype=float), np.array(faces), closed=closed)


def write_mesh(path, mesh):
    """Write ``mesh`` as OFF or OBJ (by extension) with 17 significant digits."""
    path = Path(path)
    suffix = path.suffix.lower()
    with open(path, "w") as fh:
        if suffix == ".off":
            fh.write("OFF\n")
            fh.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
            for p in mesh.vertices:
                fh.write(" ".join(f"{x:.17g}" for x in p) + "\n")
            for t in mesh.triangles:
                fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        elif suffix == ".obj":
            for p in mesh.vertices:
                fh.write("v " + " ".join(f"{x:.17g}" for x in p) + "\n")
            for t in mesh.triangles:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        else:
            raise ParseError(f"unsupported mesh format {suffix!r}")


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class RunConfig:
    mesh: str = "discocyte"
    refinements: int = 6
    params: ParamSet = ParamSet()
    output_dir: str = "output"
    output_every: int = 40
    solver: str = "consistent"
    mode: str = "sharp"
    preset: str = ""

    def __post_init__(self):
        if self.output_every < 1:
            raise InvariantViolation("output_every must be >= 1")
        if self.refinements < 0:
            raise InvariantViolation("refinements must be >= 0")
        if self.solver not in ("consistent", "lumped"):
            raise BadValue(f"solver must be 'consistent' or 'lumped', got {self.solver!r}")
        if self.mode not in MODES:
            raise BadValue(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "regularized" and not self.params.epsilon > 0:
            raise InvariantViolation("regularized mode needs epsilon > 0")


_RUN_KEYS = ("mesh", "refinements", "output_dir", "output_every", "solver", "mode", "preset")
CONFIG_KEYS = _RUN_KEYS + _PARAM_KEYS


def _parse_value(key, text):
    text = text.strip()
    if key in ("refinements", "output_every"):
        try:
            return int(text)
        except ValueError:
            raise BadValue(f"{key} expects an integer, got {text!r}") from None
    if key in _PARAM_KEYS:
        try:
            return float(text)
        except ValueError:
            raise BadValue(f"{key} expects a number, got {text!r}") from None
    if not text:
        raise BadValue(f"{key} needs a value")
    return text


def parse_assignments(lines, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadValue(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def parse_config(path=None, overrides=None):
    """Build a :class:`RunConfig`.

    Layers, later wins: standard defaults, the named preset, the config file,
    then ``overrides`` (a dict of raw strings or typed values, e.g. from the
    command line). A preset named in the overrides replaces one from the file.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_assignments(fh, source=str(path)))
    for key, value in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"unknown key {key!r}")
        values[key] = _parse_value(key, value) if isinstance(value, str) else value

    preset = values.pop("preset", "") or ""
    if preset and preset not in PRESETS:
        raise BadValue(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    param_values = dict(PRESETS.get(preset, {}))
    run_values = {}
    for key, value in values.items():
        if key in _PARAM_KEYS:
            param_values[key] = value
        else:
            run_values[key] = value
    params = ParamSet(**{k: float(v) for k, v in param_values.items()})
    # a positive epsilon with no explicit mode asks for the smoothed laws
    if "mode" not in run_values and params.epsilon > 0:
        run_values["mode"] = "regularized"
    return RunConfig(params=params, preset=preset, **run_values)


def format_config(config):
    """Serialize a :class:`RunConfig` so that :func:`parse_config` restores it."""
    lines = []
    for key in _RUN_KEYS:
        if key == "preset":
            continue
        lines.append(f"{key} = {getattr(config, key)}")
    for key in _PARAM_KEYS:
        lines.append(f"{key} = {getattr(config.params, key)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- VTK


def write_fields_vtk(path, mesh, U, W, dist, linker_intact, title="blebsim snapshot"):
    """Legacy ASCII VTK polydata of the deformed surface with point data.

    Floats are printed with 17 significant digits, so the output is a
    deterministic function of its inputs.
    """
    U = np.asarray(U, dtype=float)
    W = np.asarray(W, dtype=float)
    n = mesh.n_vertices
    f = mesh.n_triangles
    fmt = "{:.17g}".format
    out = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {n} double",
    ]
    out += [" ".join(map(fmt, p)) for p in U]
    out.append(f"POLYGONS {f} {4 * f}")
    out += [f"3 {t[0]} {t[1]} {t[2]}" for t in mesh.triangles]
    out.append(f"POINT_DATA {n}")
    out.append("VECTORS curvature double")
    out += [" ".join(map(fmt, w)) for w in W]
    out.append("SCALARS dist_to_cortex double 1")
    out.append("LOOKUP_TABLE default")
    out += [fmt(d) for d in np.asarray(dist, dtype=float)]
    out.append("SCALARS linker_intact int 1")
    out.append("LOOKUP_TABLE default")
    out += [str(int(b)) for b in np.asarray(linker_intact)]
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_vtk(path, mesh, state):
    """Write a :class:`~blebsim.sim.SimState` snapshot as legacy VTK."""
    write_fields_vtk(path, mesh, state.U, state.W, state.dist, state.linker_intact,
                     title=f"blebsim step {state.step} t={state.time:.17g}")
