"""Command line entry point: ``blebsim run | verify | mesh-info``.

Exit codes: 0 success, 1 configuration or input error, 2 solver failure,
3 a verification suite missed its threshold.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from .assembly import volume
from .errors import BlebsimError, ConfigError, SolverFailure
from .forces import MODES, PRESETS, make_model
from .geometry import cube_sphere, make_discocyte
from .io import format_config, parse_config, read_mesh, write_fields_vtk
from .mesh import refine_bisect, stats
from .sim import run
from .verify import geometric_convergence, identity_suite, manufactured_convergence

logger = logging.getLogger("blebsim")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3

_FLAG_KEYS = {
    "mesh": "mesh",
    "refine": "refinements",
    "tau": "tau",
    "t_end": "t_end",
    "out": "output_dir",
    "output_every": "output_every",
    "preset": "preset",
    "mode": "mode",
    "epsilon": "epsilon",
    "solver": "solver",
}


def _common_flags(p):
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--mesh", metavar="NAME|PATH", help="'sphere', 'discocyte' or an .off/.obj file")
    p.add_argument("--refine", type=int, metavar="N", help="bisection passes applied to the mesh")
    p.add_argument("--tau", type=float, metavar="X")
    p.add_argument("--t-end", dest="t_end", type=float, metavar="X")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--output-every", dest="output_every", type=int, metavar="N")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--epsilon", type=float, metavar="X")
    p.add_argument("--solver", choices=("consistent", "lumped"))
    p.add_argument("--set", dest="assignments", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="blebsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _common_flags(sub.add_parser("run", help="simulate and write VTK snapshots"))
    _common_flags(sub.add_parser("mesh-info", help="print mesh statistics"))
    verify = sub.add_parser("verify", help="convergence and identity suites")
    _common_flags(verify)
    verify.add_argument("--suite", choices=("identities", "geometric", "manufactured", "all"),
                        default="all")
    verify.add_argument("--levels", default="1,2,3",
                        help="comma separated sphere levels for the convergence suites")
    verify.add_argument("--tau-factor", type=float, default=2.0,
                        help="c in tau = c h^2 for the manufactured suite")
    verify.add_argument("--min-eoc", type=float, default=None,
                        help="pass threshold for the last two observed orders "
                             "(default 1.9 geometric, 1.0 manufactured)")
    return parser


def config_from_args(args):
    overrides = {}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in args.assignments:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key] = value
    return parse_config(args.config, overrides)


def load_mesh(config):
    """Build the configured reference surface."""
    name = config.mesh
    if name == "discocyte":
        return make_discocyte(config.refinements)
    if name == "sphere":
        return cube_sphere(config.refinements)
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"mesh {name!r} is neither 'sphere', 'discocyte' nor an existing file")
    mesh = read_mesh(path)
    if config.refinements:
        mesh = refine_bisect(mesh, config.refinements)
    return mesh


def _setup_logging(verbose, logfile=None):
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    root.addHandler(console)
    handlers = [console]
    if logfile is not None:
        fh = logging.FileHandler(logfile, mode="w")
        fh.setLevel(logging.DEBUG if verbose else logging.INFO)
        fh.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
        root.addHandler(fh)
        handlers.append(fh)
    return handlers


def _cmd_mesh_info(config, out):
    mesh = load_mesh(config)
    s = stats(mesh)
    print(f"mesh: {config.mesh} ({config.refinements} refinement passes)", file=out)
    print(f"n_vertices: {s.n_vertices}", file=out)
    print(f"n_triangles: {s.n_triangles}", file=out)
    print(f"h_max: {s.h_max:.6g}", file=out)
    print(f"total_area: {s.total_area:.6g}", file=out)
    print(f"volume: {volume(mesh, mesh.vertices):.6g}", file=out)
    print(f"euler_characteristic: {mesh.euler_characteristic}", file=out)
    return EXIT_OK


def _cmd_run(config, out):
    outdir = Path(config.output_dir)
    mesh = load_mesh(config)
    model = make_model(config.mode, config.params)
    (outdir / "config.txt").write_text(format_config(config))
    logger.info("mesh %s: %d vertices, %d triangles", config.mesh, mesh.n_vertices,
                mesh.n_triangles)
    written = []

    def hook(step, t, mesh_, U, W, linker_intact, dist):
        path = outdir / f"snapshot_{step:06d}.vtk"
        write_fields_vtk(path, mesh_, U, W, dist, linker_intact,
                         title=f"blebsim step {step} t={t:.17g}")
        written.append(path)

    t0 = time.perf_counter()
    state = run(mesh, model, config.params, output_hook=hook, output_every=config.output_every,
                lumped=config.solver == "lumped")
    broken = int((~state.linker_intact).sum())
    print(f"finished {state.step} steps to t={state.time:.6g} in {time.perf_counter() - t0:.1f}s; "
          f"{broken} broken linkers; {len(written)} snapshots in {outdir}", file=out)
    return EXIT_OK


def _cmd_verify(config, args, out):
    levels = [int(x) for x in args.levels.split(",") if x.strip()]
    ok = True
    if args.suite in ("identities", "all"):
        report = identity_suite(load_mesh(config))
        for line in report.lines():
            print(line, file=out)
        ok &= report.passed
    reports = []
    if args.suite in ("geometric", "all"):
        reports.append(("geometric", ("area", "volume"), 1.9, geometric_convergence(levels)))
    if args.suite in ("manufactured", "all"):
        report = manufactured_convergence(levels, tau_factor=args.tau_factor,
                                          lumped=config.solver == "lumped")
        reports.append(("manufactured", ("u",), 1.0, report))
    for name, keys, default_min, report in reports:
        threshold = default_min if args.min_eoc is None else args.min_eoc
        print(f"# {name}", file=out)
        out.write(report.to_csv())
        for key in keys:
            tail = report.eoc(key)[-2:]
            passed = bool(tail) and all(e >= threshold for e in tail)
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'} {name}: eoc_{key} "
                  f"{', '.join(f'{e:.3f}' for e in tail)} (min {threshold})", file=out)
    print("verify: PASS" if ok else "verify: FAIL", file=out)
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None, out=None):
    """Run the CLI and return its exit code."""
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    handlers = []
    try:
        config = config_from_args(args)
        logfile = None
        if args.command == "run":
            outdir = Path(config.output_dir)
            outdir.mkdir(parents=True, exist_ok=True)
            logfile = outdir / "run.log"
        handlers = _setup_logging(args.verbose, logfile)
        if args.command == "mesh-info":
            return _cmd_mesh_info(config, out)
        if args.command == "run":
            return _cmd_run(config, out)
        return _cmd_verify(config, args, out)
    except SolverFailure as exc:
        logger.error("solver failure: %s", exc)
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (BlebsimError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        root = logging.getLogger()
        for h in handlers:
            root.removeHandler(h)
            h.close()


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
