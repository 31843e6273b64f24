"""Configuration-driven mesh-refinement studies.

A :class:`RunConfig` names a domain, a polynomial degree, a method, a
coefficient case and a ladder of meshes (builtin ring counts or MSH files);
:func:`run_convergence_study` solves every level, measures L2 (and
optionally mesh-norm) errors, and produces a
:class:`~dgrod.analysis.ConvergenceReport`.  :func:`write_outputs` writes
the delimited reports, a configuration echo, and a convergence figure into
the run directory.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, assembly, geometry, mesh, problems
from .basis import nodal_basis

GENERATORS = {
    "disk": mesh.generate_disk_mesh,
    "annulus": mesh.generate_annulus_mesh,
    "rose": mesh.generate_rose_mesh,
}

DEFAULT_LEVELS = {
    "disk": [3, 6, 12, 24],
    "annulus": [2, 4, 8, 16],
    "rose": [2, 4, 8, 16],
}


class ConfigError(Exception):
    """The run configuration is invalid (CLI exit code 2)."""


class StudyError(Exception):
    """A mesh level failed to build or solve (CLI exit code 3)."""


@dataclass
class RunConfig:
    """Complete description of one refinement study.

    Serializes losslessly to/from JSON; every field has a documented
    default (see README for the schema).  ``seed`` is reserved for
    randomized diagnostics and recorded in outputs.
    """

    run_name: str = "study"
    domain: dict = field(default_factory=lambda: {"kind": "disk", "radius": 1.0})
    degree: int = 2
    method: str = "rod_global"
    coeff_case: int = 1
    builtin_levels: list[int] | None = None
    mesh_files: list[str] = field(default_factory=list)
    eta0: float = 10.0
    volume_degree: int | None = None
    edge_points: int | None = None
    error_degree: int | None = None
    solver_tol: float = 1e-11
    max_iter: int = 50
    stop_tol: float = 1e-12
    out_dir: str = "out"
    formats: list[str] = field(default_factory=lambda: ["csv", "md"])
    figures: bool = True
    dg_norm: bool = False
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.degree <= 4:
            raise ConfigError("degree must be in 1..4")
        if self.method not in assembly.METHODS:
            raise ConfigError(f"method must be one of {assembly.METHODS}")
        if self.coeff_case not in (1, 2, 3):
            raise ConfigError("coeff_case must be 1, 2 or 3")
        if self.domain.get("kind") not in GENERATORS:
            raise ConfigError("domain.kind must be disk, annulus or rose")
        if self.eta0 <= 0:
            raise ConfigError("eta0 must be positive")
        if not self.mesh_files and not self.levels():
            raise ConfigError("need at least one mesh level")
        bad = [f for f in self.formats if f not in ("csv", "md")]
        if bad:
            raise ConfigError(f"unknown output formats: {bad}")
        if self.solver_tol <= 0 or self.stop_tol <= 0 or self.max_iter < 1:
            raise ConfigError("solver/iteration controls must be positive")
        if self.volume_degree is not None and not 1 <= self.volume_degree <= 12:
            raise ConfigError("volume_degree must be in 1..12")
        if self.error_degree is not None and not 1 <= self.error_degree <= 12:
            raise ConfigError("error_degree must be in 1..12")
        if self.edge_points is not None and not 1 <= self.edge_points <= 10:
            raise ConfigError("edge_points must be in 1..10")

    def levels(self) -> list[int]:
        if self.builtin_levels is not None:
            return list(self.builtin_levels)
        return [] if self.mesh_files else DEFAULT_LEVELS[self.domain["kind"]]

    def make_domain(self) -> geometry.CurvedDomain:
        d = dict(self.domain)
        kind = d.pop("kind")
        try:
            if kind == "disk":
                return geometry.disk(**d)
            if kind == "annulus":
                return geometry.annulus(**d)
            return geometry.rose(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain parameters: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _metadata(config: RunConfig) -> dict:
    dom = config.domain
    return {
        "run_name": config.run_name,
        "domain": " ".join(f"{k}={dom[k]}" for k in sorted(dom)),
        "degree": config.degree,
        "method": config.method,
        "coeff_case": config.coeff_case,
        "eta0": config.eta0,
        "volume_degree": config.volume_degree or 2 * config.degree + 3,
        "edge_points": config.edge_points or config.degree + 2,
        "error_degree": config.error_degree or max(2 * config.degree + 4, 10),
        "solver_tol": config.solver_tol,
        "stop_tol": config.stop_tol,
        "max_iter": config.max_iter,
        "levels": (",".join(map(str, config.levels()))
                   if not config.mesh_files else
                   ",".join(Path(f).name for f in config.mesh_files)),
        "seed": config.seed,
    }


def _build_mesh(config, domain, level):
    if config.mesh_files:
        path = Path(config.mesh_files[level])
        tri = mesh.read_gmsh(path.read_text(), domain)
    else:
        rings = config.levels()[level]
        tri = GENERATORS[domain.kind](domain, rings)
    quality = mesh.validate(tri, domain)
    if not quality.passed:
        raise StudyError(f"level {level}: mesh failed validation: "
                         f"{quality.violations}")
    return tri


_SOLVERS = {
    "classical": assembly.solve_classical,
    "rod_global": assembly.solve_rod_global,
    "rod_iterative": assembly.solve_rod_iterative,
}


def run_convergence_study(config: RunConfig) -> analysis.ConvergenceReport:
    """Run every mesh level of the configured study and collect the report."""
    config.validate()
    domain = config.make_domain()
    problem = problems.make_case(domain.kind, config.coeff_case)
    basis = nodal_basis(config.degree)
    spec = assembly.DGSystemSpec(
        N=config.degree, eta0=config.eta0, method=config.method,
        volume_degree=config.volume_degree, edge_points=config.edge_points,
        max_iter=config.max_iter, stop_tol=config.stop_tol)

    n_levels = (len(config.mesh_files) if config.mesh_files
                else len(config.levels()))
    levels = []
    for lv in range(n_levels):
        t0 = time.perf_counter()
        try:
            tri = _build_mesh(config, domain, lv)
            result = _SOLVERS[config.method](problem, tri, domain, basis, spec,
                                             solver_tol=config.solver_tol)
            e2 = analysis.l2_error(result.u, problem, tri, basis,
                                   degree=config.error_degree)
            row = analysis.LevelResult(K=tri.n_elements, h=tri.h, E2=e2)
            if config.dg_norm:
                total, parts = analysis.dg_norm_error(
                    result.u, problem, tri, basis,
                    b=(problem.b1, problem.b2), degree=config.error_degree)
                row.dg_norm = total
                row.dg_breakdown = parts
            row.stats = {"wall_time_s": time.perf_counter() - t0,
                         "iterations": result.iterations,
                         "solver_residual": result.residual}
            levels.append(row)
        except StudyError:
            raise
        except Exception as exc:
            raise StudyError(f"level {lv}: {type(exc).__name__}: {exc}") from exc

    analysis.attach_orders(levels)
    return analysis.ConvergenceReport(levels=levels, metadata=_metadata(config))


@dataclass
class PatchTestResult:
    """E2 per ring count for the exact-reproduction test."""

    rod_global: dict[int, float]
    classical: dict[int, float]


def run_patch_test(rings=(2, 4), degree: int = 2, eta0: float = 10.0,
                   solver_tol: float = 1e-11) -> PatchTestResult:
    """Solve the quadratic disk problem that the constrained space reproduces.

    The exact solution ``1 - x^2 - y^2`` vanishes on the whole physical
    boundary and lies in the degree->=2 local spaces, so the constrained
    one-shot method returns it to solver/quadrature round-off.  The
    classical method is run for contrast (it carries the second-order
    geometric boundary error and cannot be exact).
    """
    if degree < 2:
        raise ConfigError("the patch solution needs degree >= 2")
    domain = geometry.disk(1.0)
    problem = problems.make_patch_problem(1)
    basis = nodal_basis(degree)
    rod, cls = {}, {}
    for r in rings:
        tri = mesh.generate_disk_mesh(domain, r)
        spec = assembly.DGSystemSpec(N=degree, eta0=eta0, method="rod_global")
        res = assembly.solve_rod_global(problem, tri, domain, basis, spec,
                                        solver_tol=solver_tol)
        rod[r] = analysis.l2_error(res.u, problem, tri, basis)
        spec_c = assembly.DGSystemSpec(N=degree, eta0=eta0, method="classical")
        res_c = assembly.solve_classical(problem, tri, domain, basis, spec_c,
                                         solver_tol=solver_tol)
        cls[r] = analysis.l2_error(res_c.u, problem, tri, basis)
    return PatchTestResult(rod_global=rod, classical=cls)


def write_outputs(report: analysis.ConvergenceReport,
                  config: RunConfig) -> dict[str, Path]:
    """Write reports, config echo, and the convergence figure to the run dir.

    Returns the written paths keyed by artifact name.
    """
    run_dir = Path(config.out_dir) / config.run_name
    run_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    if "csv" in config.formats:
        paths["csv"] = run_dir / "report.csv"
        paths["csv"].write_text(analysis.emit_report(report, "csv"))
    if "md" in config.formats:
        paths["md"] = run_dir / "report.md"
        paths["md"].write_text(analysis.emit_report(report, "markdown"))
    paths["config"] = run_dir / "config_echo.json"
    paths["config"].write_text(config.to_json() + "\n")
    if config.figures:
        from .figures import render_convergence_figure
        paths["figure"] = run_dir / "convergence.png"
        render_convergence_figure(report, paths["figure"])
    return paths
