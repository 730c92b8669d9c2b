"""Convergence studies on the manufactured benchmark suites.

For each level a control mesh is built, the problem is assembled and solved
with the spline method and/or the linear FEM baseline, and L2/H1 errors are
measured against the exact solution. Results go to a CSV file plus a
gnuplot script plotting error against level.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import assemble, build_system
from .basis import PatchBasis, prepare_analysis_mesh
from .baseline import LinearFemSpace, assemble_linear, linear_errors
from .generators import generate_test_mesh
from .geometry import iter_samples, tangential_gradient
from .manufactured import SUITES, Manufactured, manufactured
from .mesh import ControlMesh
from .quadrature import RULES, QuadratureRule, quadrature
from .solver import METHODS, STRATEGIES, solve
from .subdivision import fit_control_values, limit_positions, subdivide

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "method",
    "level",
    "vertices",
    "patches",
    "h",
    "l2_error",
    "h1_error",
    "rate",
    "basis_seconds",
    "assemble_seconds",
    "solve_seconds",
)
DISCRETIZATIONS = ("iga_loop", "fem_linear")
REFINEMENTS = ("regenerate", "subdivide")


@dataclass
class SuiteConfig:
    """Options of one convergence study.

    ``refinement='regenerate'`` rebuilds the generator mesh at doubled
    resolution per level (vertices on the analytic surface);
    ``'subdivide'`` refines the level-0 control mesh, keeping its limit
    surface. ``fit_limit`` places limit points instead of control points on
    the analytic surface. ``height`` only applies to the biharmonic cylinder.
    """

    suite: str = "harmonic_quarter_cylinder"
    levels: int = 3
    method: str = "both"
    quadrature: str = "twelve_point"
    solver: str = "direct"
    strategy: str = "block"
    tol: float = 1e-10
    refinement: str = "regenerate"
    resolution: int = 1
    fit_limit: bool = False
    height: float | None = None
    out: str | None = None

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}; expected one of {SUITES}")
        if int(self.levels) < 1:
            raise ValueError("levels must be >= 1")
        if self.method not in DISCRETIZATIONS + ("both",):
            raise ValueError(f"unknown method {self.method!r}")
        if self.quadrature not in RULES:
            raise ValueError(f"unknown quadrature {self.quadrature!r}")
        if self.solver not in METHODS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.refinement not in REFINEMENTS:
            raise ValueError(f"unknown refinement {self.refinement!r}")
        if self.height is not None and self.suite != "biharmonic_cylinder":
            raise ValueError("height applies to biharmonic_cylinder only")
        self.levels = int(self.levels)
        self.resolution = int(self.resolution)

    @property
    def methods(self):
        return DISCRETIZATIONS if self.method == "both" else (self.method,)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class LevelResult:
    """One row of a convergence report."""

    method: str
    level: int
    vertices: int = 0
    patches: int = 0
    h: float = math.nan
    l2_error: float = math.nan
    h1_error: float = math.nan
    rate: float = math.nan
    basis_seconds: float = 0.0
    assemble_seconds: float = 0.0
    solve_seconds: float = 0.0
    residual: float = math.nan
    mean_error: float = 0.0
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


@dataclass
class ConvergenceReport:
    config: SuiteConfig
    rows: list = field(default_factory=list)

    @property
    def ok(self):
        return all(r.ok for r in self.rows) and len(self.rows) == self.config.levels * len(self.config.methods)

    def results(self, method):
        return [r for r in self.rows if r.method == method]

    def errors(self, method, norm="l2"):
        return np.array([getattr(r, f"{norm}_error") for r in self.results(method)])

    def rates(self, method, norm="l2"):
        return observed_rates(self.errors(method, norm))

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return path

    def write_gnuplot(self, path, csv_name):
        path = Path(path)
        lines = [
            "set datafile separator ','",
            "set logscale y",
            "set xlabel 'level'",
            "set ylabel 'L2 error'",
            f"set title '{self.config.suite}'",
            "set key top right",
            "set terminal pngcairo size 800,600",
            f"set output '{path.with_suffix('.png').name}'",
        ]
        plots = [
            f"'{csv_name}' using 2:(strcol(1) eq '{m}' ? $6 : 1/0) with linespoints title '{m}'"
            for m in self.config.methods
        ]
        lines.append("plot " + ", \\\n     ".join(plots))
        path.write_text("\n".join(lines) + "\n")
        return path


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def observed_rates(errors):
    """``log2(e_k / e_{k+1})`` for consecutive levels."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(e[:-1] / e[1:])


# ------------------------------------------------------------------ norms
def iga_errors(mesh: ControlMesh, coefficients, u, grad_u=None, rule="twelve_point", basis=None):
    """L2 error and H1 seminorm error of a spline field on the limit surface.

    The exact gradient is projected onto the tangent plane of the limit
    surface before comparing with the tangential gradient of the field.
    """
    if isinstance(rule, str):
        rule = quadrature(rule)
    c = np.asarray(coefficients, dtype=float)
    l2 = h1 = 0.0
    for gs in iter_samples(mesh, rule, basis):
        g = gs.group
        cs = c[g.stencils]  # (F, s)
        uh = cs @ g.values.T
        x = gs.sample.position
        l2 += float(np.sum(gs.jxw * (uh - u(x.reshape(-1, 3)).reshape(uh.shape)) ** 2))
        if grad_u is not None:
            gh = tangential_gradient(gs.sample, cs @ g.d_xi.T, cs @ g.d_eta.T)
            ge = grad_u(x.reshape(-1, 3)).reshape(x.shape)
            nrm = gs.sample.normal
            ge = ge - np.sum(ge * nrm, axis=-1, keepdims=True) * nrm
            h1 += float(np.sum(gs.jxw * np.sum((gh - ge) ** 2, axis=-1)))
    return math.sqrt(l2), (math.sqrt(h1) if grad_u is not None else None)


def l2_error(mesh: ControlMesh, coefficients, u, rule="twelve_point", basis=None):
    """L2 norm of ``u_h - u`` over the limit surface."""
    return iga_errors(mesh, coefficients, u, None, rule, basis)[0]


def interpolate(mesh: ControlMesh, u):
    """Control values whose limit values equal ``u`` at the limit points."""
    return fit_control_values(mesh, u(limit_positions(mesh)))


# ------------------------------------------------------------------ driver
def level_mesh(config: SuiteConfig, problem: Manufactured, level: int, previous=None) -> ControlMesh:
    if config.refinement == "subdivide" and level > 0:
        if previous is None:
            raise ValueError("subdivision needs the previous level's mesh")
        return subdivide(previous)
    res = config.resolution * (2**level if config.refinement == "regenerate" else 1)
    mesh = generate_test_mesh(problem.mesh_kind, res, fit_limit=config.fit_limit, **problem.mesh_options)
    return prepare_analysis_mesh(mesh)


def _problem(config: SuiteConfig) -> Manufactured:
    opts = {} if config.height is None else {"height": config.height}
    return manufactured(config.suite, **opts)


def _mean_error(system, report):
    c = system.meta["mean_weights"]
    worst = 0.0
    for f in system.fields:
        if f.multiplier is not None:
            x = report.fields[f.name]
            scale = float(np.abs(c) @ np.abs(x)) or 1.0
            worst = max(worst, abs(float(c @ x)) / scale)
    return worst


def solve_level(config: SuiteConfig, problem: Manufactured, mesh: ControlMesh, method: str, rule: QuadratureRule):
    """Assemble, solve and measure one discretization on one mesh."""
    row = LevelResult(method, 0, mesh.n_vertices, mesh.n_faces, mesh.max_edge_length())
    limits = limit_positions(mesh)
    if method == "iga_loop":
        t0 = time.perf_counter()
        basis = PatchBasis(mesh, rule.points)
        row.basis_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        blocks = assemble(mesh, problem.f, rule, basis)
        bnd = blocks.boundary
        g = fit_control_values(mesh, problem.u(limits[bnd]), vertices=bnd) if len(bnd) else None
    else:
        t0 = time.perf_counter()
        blocks = assemble_linear(mesh, problem.f)
        g = problem.u(limits[blocks.boundary]) if len(blocks.boundary) else None
    system = build_system(blocks, problem.order, g)
    row.assemble_seconds = time.perf_counter() - t0
    rep = solve(system, config.solver, config.strategy, config.tol)
    row.solve_seconds = rep.seconds
    row.residual = rep.residual
    row.mean_error = _mean_error(system, rep)
    if method == "iga_loop":
        row.l2_error, row.h1_error = iga_errors(mesh, rep.U, problem.u, problem.grad_u, rule, basis)
    else:
        row.l2_error, row.h1_error = linear_errors(LinearFemSpace.from_mesh(mesh), rep.U, problem.u, problem.grad_u, rule)
    return row, system, rep


def run_suite(config: SuiteConfig) -> ConvergenceReport:
    """Run every level and method; write CSV and plot script when ``config.out`` is set."""
    problem = _problem(config)
    rule = quadrature(config.quadrature)
    report = ConvergenceReport(config)
    mesh = None
    for level in range(config.levels):
        try:
            mesh = level_mesh(config, problem, level, mesh)
        except Exception as exc:  # noqa: BLE001 - recorded in the report
            logger.error("level %d: mesh construction failed: %s", level, exc)
            for m in config.methods:
                report.rows.append(LevelResult(m, level, error=f"mesh: {exc}"))
            break
        for method in config.methods:
            try:
                row, _, _ = solve_level(config, problem, mesh, method, rule)
            except Exception as exc:  # noqa: BLE001
                logger.error("level %d (%s) failed: %s", level, method, exc)
                row = LevelResult(method, level, mesh.n_vertices, mesh.n_faces, error=str(exc))
            row.level = level
            prev = report.results(method)
            if prev and prev[-1].ok and row.ok:
                row.rate = float(observed_rates([prev[-1].l2_error, row.l2_error])[0])
            report.rows.append(row)
            logger.info(
                "%s level %d: V=%d l2=%.3e h1=%.3e rate=%.2f",
                method, level, row.vertices, row.l2_error, row.h1_error, row.rate,
            )
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = report.write_csv(out / f"{config.suite}.csv")
        report.write_gnuplot(out / f"{config.suite}.gp", csv_path.name)
    return report
