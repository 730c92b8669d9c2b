"""Command line interface.

::

    loopiga run --suite triharmonic_sphere --levels 3 --method both --out results/
    loopiga mesh gen --kind octant_sphere --resolution 2 --out octant.off
    loopiga mesh subdivide octant.off --steps 1 --out octant1.off
    loopiga mesh limit octant.off --out octant_limit.off
    loopiga dump --matrix K --suite harmonic_octant_sphere --level 0 --out K.mtx

``run`` and ``dump`` accept ``--config FILE`` (TOML or JSON) holding the
same keys as the flags, with underscores; flags given on the command line
win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .assembly import build_system, dump_matrix
from .generators import KINDS, generate_test_mesh
from .harness import DISCRETIZATIONS, REFINEMENTS, SuiteConfig, _problem, level_mesh, run_suite
from .manufactured import SUITES
from .mesh import load_mesh, save_mesh
from .quadrature import RULES, quadrature
from .solver import METHODS, STRATEGIES
from .subdivision import limit_positions, subdivide

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger("loopiga")

_SUITE_KEYS = (
    "suite", "levels", "method", "quadrature", "solver", "strategy", "tol",
    "refinement", "resolution", "fit_limit", "height", "out",
)  # fmt: skip


def read_config(path):
    """Flat key/value mapping from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    elif path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
    else:
        raise ValueError(f"config must be .toml or .json, got {path.name}")
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise ValueError("config must be a flat table of scalar values")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _suite_options(p, with_out=True):
    p.add_argument("--config", help="TOML or JSON file with default values")
    p.add_argument("--suite", choices=SUITES)
    p.add_argument("--method", choices=DISCRETIZATIONS + ("both",))
    p.add_argument("--quadrature", choices=RULES)
    p.add_argument("--solver", choices=METHODS)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--tol", type=float)
    p.add_argument("--refinement", choices=REFINEMENTS)
    p.add_argument("--resolution", type=int)
    p.add_argument("--fit-limit", dest="fit_limit", action="store_true", default=None)
    p.add_argument("--height", type=float, help="biharmonic cylinder height (default pi)")
    if with_out:
        p.add_argument("--out", help="output directory")


def _suite_config(args, **overrides):
    data = read_config(args.config) if args.config else {}
    for key in _SUITE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    data.update(overrides)
    return SuiteConfig.from_mapping(data)


def build_parser():
    parser = argparse.ArgumentParser(prog="loopiga", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="convergence study of one suite")
    _suite_options(run)
    run.add_argument("--levels", type=int)

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("gen", help="write a generator mesh")
    gen.add_argument("--kind", choices=KINDS, required=True)
    gen.add_argument("--resolution", type=int, default=1)
    gen.add_argument("--fit-limit", action="store_true")
    gen.add_argument("--height", type=float)
    gen.add_argument("--out", required=True)
    sd = msub.add_parser("subdivide", help="apply subdivision steps")
    sd.add_argument("input")
    sd.add_argument("--steps", type=int, default=1)
    sd.add_argument("--out", required=True)
    lim = msub.add_parser("limit", help="move vertices to their limit positions")
    lim.add_argument("input")
    lim.add_argument("--out", required=True)

    dump = sub.add_parser("dump", help="write assembled matrices in MatrixMarket format")
    dump.add_argument("--matrix", choices=("K", "M", "system"), required=True)
    dump.add_argument("--level", type=int, default=0)
    _suite_options(dump, with_out=False)
    dump.add_argument("--out", required=True, help="output .mtx file")
    return parser


def _cmd_run(args):
    cfg = _suite_config(args)
    report = run_suite(cfg)
    print(f"{'method':<11}{'level':>6}{'vertices':>10}{'patches':>9}{'l2_error':>13}{'h1_error':>13}{'rate':>7}")
    for r in report.rows:
        if not r.ok:
            print(f"{r.method:<11}{r.level:>6}  FAILED: {r.error}")
            continue
        rate = "" if math.isnan(r.rate) else f"{r.rate:.2f}"
        print(
            f"{r.method:<11}{r.level:>6}{r.vertices:>10}{r.patches:>9}"
            f"{r.l2_error:>13.4e}{r.h1_error:>13.4e}{rate:>7}"
        )
    if cfg.out:
        print(f"wrote {Path(cfg.out) / (cfg.suite + '.csv')}")
    return 0 if report.ok else 1


def _cmd_mesh(args):
    if args.mesh_command == "gen":
        opts = {} if args.height is None else {"height": args.height}
        mesh = generate_test_mesh(args.kind, args.resolution, fit_limit=args.fit_limit, **opts)
    else:
        mesh = load_mesh(args.input)
        if args.mesh_command == "subdivide":
            for _ in range(args.steps):
                mesh = subdivide(mesh)
        else:
            mesh = mesh.with_positions(limit_positions(mesh))
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_faces} faces")
    return 0


def _cmd_dump(args):
    from .assembly import assemble
    from .baseline import assemble_linear

    cfg = _suite_config(args, levels=max(args.level + 1, 1), out=None)
    if cfg.method == "both":
        raise ValueError("dump needs a single --method")
    problem = _problem(cfg)
    mesh = None
    for level in range(args.level + 1):
        mesh = level_mesh(cfg, problem, level, mesh)
    if cfg.method == "iga_loop":
        blocks = assemble(mesh, problem.f, quadrature(cfg.quadrature))
    else:
        blocks = assemble_linear(mesh, problem.f)
    target = {"K": blocks.K, "M": blocks.M}.get(args.matrix)
    if target is None:
        target = build_system(blocks, problem.order, None).matrix
    dump_matrix(target, args.out, comment=f"{cfg.suite} {cfg.method} level {args.level} {args.matrix}")
    print(f"wrote {args.out}: {target.shape[0]}x{target.shape[1]}, {target.nnz} nonzeros")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        handler = {"run": _cmd_run, "mesh": _cmd_mesh, "dump": _cmd_dump}[args.command]
        return handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
