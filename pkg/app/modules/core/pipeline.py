"""
Core Pipeline: Orquestração compartilhada
==========================================
Constrói os objetos de domínio a partir do ProblemConfig e executa cada
comando devolvendo um RunResult (summary + artefatos em memória). A CLI grava
os artefatos em disco; os routers devolvem apenas o summary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from app.errors import ConfigError, ValidationFailedError
from app.modules.asymptotics.report_service import RunReportService
from app.modules.asymptotics.service import residual_report
from app.modules.elliptic.green_service import probe_green
from app.modules.exterior.service import solve_exterior, uniqueness_check
from app.modules.grid.polar import PolarField, PolarGrid
from app.modules.ingest.service import SamplingPlan, SourceValidationService, normalize_source, spherical_average
from app.modules.ingest.source import BUILTIN_SOURCES, AffineData, BoundaryData, ExteriorSpec, SourceField, tabulated
from app.modules.iteration.service import GlobalSolution, solve_global
from app.modules.oracle.service import OracleField, StencilScheme, compare, oracle_solve_disk
from app.modules.radial.service import CoefficientField, RadialProfile, build_coefficients, build_radial_solution
from app.schemas import BoundaryConfig, ProblemConfig, SourceConfig, SourceFamily

log = logging.getLogger("ampere2d.core.pipeline")

_RANDOM_CHECKS = 2000


@dataclass
class RunResult:
    command: str
    summary: dict[str, Any]
    exit_code: int = 0
    frames: dict[str, pd.DataFrame] = field(default_factory=dict)
    fields: dict[str, PolarField] = field(default_factory=dict)
    profile: RadialProfile | None = None
    documents: dict[str, bytes] = field(default_factory=dict)


# ══════════════════════════════════════════════
# CONSTRUTORES
# ══════════════════════════════════════════════

def build_source(cfg: SourceConfig) -> SourceField:
    try:
        if cfg.family == SourceFamily.tabulated:
            return tabulated(cfg.path, c0=cfg.c0, beta=cfg.beta)
        factory = BUILTIN_SOURCES[cfg.family.value]
        params = {k: (int(v) if k == "k" else v) for k, v in cfg.params.items()}
        return factory(**params)
    except TypeError as e:
        raise ConfigError(f"parâmetro inválido para {cfg.family.value}: {e}", location="source.params") from e
    except (ValueError, FileNotFoundError) as e:
        raise ConfigError(str(e), location="source") from e


def build_affine(cfg: ProblemConfig) -> AffineData:
    try:
        return AffineData(A=np.array(cfg.affine.A), b=np.array(cfg.affine.b), c=cfg.affine.c)
    except ValueError as e:
        raise ConfigError(str(e), location="affine") from e


def build_grid(cfg: ProblemConfig, *, refined: bool = False) -> PolarGrid:
    """Grade global; no problema exterior o joelho coincide com r₀."""
    knee = cfg.exterior.r0 if cfg.exterior is not None else cfg.grid.knee
    n_r, n_theta = cfg.grid.n_r, cfg.grid.n_theta
    if refined:
        n_r, n_theta = 2 * n_r - 1, 2 * n_theta
    try:
        return PolarGrid.graded(n_r, cfg.grid.r_max, n_theta, "global", r0=knee)
    except ValueError as e:
        raise ConfigError(str(e), location="grid") from e


def build_boundary(cfg: BoundaryConfig, r0: float) -> BoundaryData:
    if cfg.kind == "radial":
        return BoundaryData.radial(r0, cfg.offset)
    if cfg.kind == "csv":
        try:
            return BoundaryData.from_csv(cfg.path)
        except (ValueError, FileNotFoundError) as e:
            raise ConfigError(str(e), location="exterior.boundary.path") from e
    terms = [(t.amplitude, t.k, t.phase) for t in cfg.terms]
    return BoundaryData.harmonic(cfg.offset, terms)


def build_exterior_spec(cfg: ProblemConfig) -> ExteriorSpec:
    if cfg.exterior is None:
        raise ConfigError("seção exterior ausente", location="exterior")
    ext = cfg.exterior
    try:
        return ExteriorSpec(r0=ext.r0, boundary_data=build_boundary(ext.boundary, ext.r0),
                            d_target=ext.d_target, alpha=ext.alpha)
    except ValueError as e:
        raise ConfigError(str(e), location="exterior") from e


def sampling_plan(cfg: ProblemConfig) -> SamplingPlan:
    v = cfg.validation
    try:
        return SamplingPlan(r_max=v.r_max, r_min=v.r_min, n_theta=v.n_theta, points_per_octave=v.points_per_octave)
    except ValueError as e:
        raise ConfigError(str(e), location="validation") from e


def radial_coefficients(f: SourceField, aff: AffineData, grid: PolarGrid) -> CoefficientField:
    """a* = cof(D²U) do perfil radial de f₁ na grade dada."""
    f1 = normalize_source(f, aff)
    ftilde = spherical_average(f1, grid.radii, n_theta=max(grid.n_theta, 64))
    return build_coefficients(build_radial_solution(ftilde), grid)


def _history_frame(history: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(history)


# ══════════════════════════════════════════════
# COMANDOS
# ══════════════════════════════════════════════

def run_validate(cfg: ProblemConfig, seed: int = 0) -> RunResult:
    """Validação amostral da fonte (+ dados exteriores) e checagem aleatória do decaimento."""
    f = build_source(cfg.source)
    aff = build_affine(cfg)
    plan = sampling_plan(cfg)
    report = SourceValidationService.validate_source(f, plan, aff, eps0_threshold=cfg.validation.eps0_threshold)
    payload = report.to_dict()

    rng = np.random.default_rng(seed)
    radius = plan.r_max * np.sqrt(rng.random(_RANDOM_CHECKS))
    angle = 2.0 * np.pi * rng.random(_RANDOM_CHECKS)
    x1, x2 = radius * np.cos(angle), radius * np.sin(angle)
    vals = f(x1, x2)
    excess = np.abs(vals - 1.0) - f.c0 * (1.0 + radius) ** (-f.beta)
    payload["random_checks"] = {"seed": seed, "n": _RANDOM_CHECKS, "max_excess": float(np.max(excess)),
                                "passed": bool(np.max(excess) <= 1e-12)}
    passed = report.passed and payload["random_checks"]["passed"]

    if cfg.exterior is not None:
        spec = build_exterior_spec(cfg)
        ext_violations = SourceValidationService.check_exterior_spec(
            spec, f, r_max=cfg.grid.r_max, eps0_threshold=cfg.validation.eps0_threshold)
        payload["exterior_violations"] = [asdict(v) for v in ext_violations]
        passed = passed and not ext_violations

    payload["passed"] = passed
    summary = {"command": "validate", "problem": cfg.name, "passed": passed, "report": payload}
    return RunResult(command="validate", summary=summary, exit_code=0 if passed else ValidationFailedError.exit_code)


def solve_global_from_config(cfg: ProblemConfig) -> tuple[GlobalSolution, SourceField]:
    f = build_source(cfg.source)
    aff = build_affine(cfg)
    grid = build_grid(cfg)
    s = cfg.solver
    solution = solve_global(f, aff, grid, s.tol, tau=s.tau, l_max=s.l_max, far_field=s.far_field,
                            fit_window=s.fit_window)
    return solution, f


def run_solve_global(cfg: ProblemConfig) -> RunResult:
    solution, f = solve_global_from_config(cfg)
    f1 = solution.f1
    res = residual_report(solution.v, f1, cfg.solver.residual_tol)
    summary = {
        "command": "solve-global",
        "problem": cfg.name,
        "n_r": solution.grid.n_r,
        "n_theta": solution.grid.n_theta,
        "r_max": solution.grid.r_max,
        "tol": cfg.solver.tol,
        **solution.summary(),
        "residual": res.summary(),
    }
    frames = {
        "history": _history_frame(solution.history),
        "residual": res.frame(),
        "fit_table": solution.fit.table_frame(),
    }
    exit_code = 0 if res.passed else 3
    return RunResult(command="solve-global", summary=summary, exit_code=exit_code, frames=frames,
                     fields={"v": solution.v}, profile=solution.profile)


def run_solve_exterior(cfg: ProblemConfig) -> RunResult:
    f = build_source(cfg.source)
    spec = build_exterior_spec(cfg)
    grid = build_grid(cfg)
    s = cfg.solver
    solution = solve_exterior(spec, f, grid, s.tol, profile=cfg.exterior.profile, tau=s.tau, k_max=s.l_max,
                              fit_window=s.fit_window, eps0_threshold=cfg.validation.eps0_threshold)
    res = residual_report(solution.u, f, cfg.solver.residual_tol)
    summary = {
        "command": "solve-exterior",
        "problem": cfg.name,
        "r0": spec.r0,
        "n_r": grid.n_r,
        "n_theta": grid.n_theta,
        "r_max": grid.r_max,
        "tol": s.tol,
        **solution.summary(),
        "residual": res.summary(),
    }
    if cfg.exterior.uniqueness:
        summary["uniqueness"] = uniqueness_check(spec, f, grid, s.tol, tau=s.tau, k_max=s.l_max,
                                                 fit_window=s.fit_window,
                                                 eps0_threshold=cfg.validation.eps0_threshold)
    frames = {
        "history": _history_frame(solution.state.history),
        "residual": res.frame(),
        "fit_table": solution.fit.table_frame(),
    }
    return RunResult(command="solve-exterior", summary=summary, exit_code=0 if res.passed else 3, frames=frames,
                     fields={"u": solution.u, "psi0": solution.psi0}, profile=solution.base.profile)


def run_probe_green(cfg: ProblemConfig, x: tuple[float, float] | None = None) -> RunResult:
    f = build_source(cfg.source)
    aff = build_affine(cfg)
    grid = build_grid(cfg)
    x = tuple(x or cfg.green.x)
    coeffs = radial_coefficients(f, aff, grid)
    refined = radial_coefficients(f, aff, build_grid(cfg, refined=True)) if cfg.green.refine else None
    try:
        probe = probe_green(coeffs, x, refined=refined)
    except ValueError as e:
        raise ConfigError(str(e), location="green.x") from e
    table = probe.refinement_table
    stability = None
    if len(table) == 2:
        stability = max(abs(table[1][k] - table[0][k]) / max(abs(table[0][k]), 1e-300)
                        for k in ("c2_fit", "grad_bound_fit"))
    summary = {
        "command": "probe-green",
        "problem": cfg.name,
        **probe.to_dict(),
        "epsilon": probe.epsilon,
        "r0_heuristic": probe.r0_heuristic,
        "refinement_change": stability,
    }
    return RunResult(command="probe-green", summary=summary, frames={"refinement": pd.DataFrame(table)},
                     fields={"green": probe.values})


def run_oracle_compare(cfg: ProblemConfig) -> RunResult:
    """Solução global vs. oráculo de estêncil largo no disco B_R com o mesmo dado de contorno."""
    solution, f = solve_global_from_config(cfg)
    o = cfg.oracle
    u = solution.u_eval()
    scheme = StencilScheme(radius=o.radius, n=o.n, width=o.width)
    oracle: OracleField = oracle_solve_disk(f, u, scheme, o.tol)
    comparison = compare(u, oracle, n_rings=o.n_rings)
    passed = bool(comparison.sup_difference <= o.acceptance_tol and oracle.residual <= o.tol)
    if not passed:
        log.warning("Oráculo fora da tolerância: sup=%.3e (aceite %.1e), resíduo=%.3e (tol %.1e)",
                    comparison.sup_difference, o.acceptance_tol, oracle.residual, o.tol)
    summary = {
        "command": "oracle-compare",
        "problem": cfg.name,
        "radius": o.radius,
        "n": o.n,
        "width": o.width,
        "oracle_residual": oracle.residual,
        "oracle_method": oracle.method,
        "oracle_iterations": oracle.iterations,
        "sup_difference": comparison.sup_difference,
        "acceptance_tol": o.acceptance_tol,
        "passed": passed,
        "fit": solution.fit.to_dict(),
    }
    frames = {"rings": comparison.table, "oracle": oracle.to_frame(), "history": pd.DataFrame(oracle.history)}
    return RunResult(command="oracle-compare", summary=summary, exit_code=0 if passed else 3, frames=frames)


def run_report(cfg: ProblemConfig) -> RunResult:
    """Executa o solve (exterior se configurado), relatório de resíduo e PDF."""
    result = run_solve_exterior(cfg) if cfg.exterior is not None else run_solve_global(cfg)
    history = result.frames["history"].to_dict(orient="records")
    cleaned = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()} for row in history]
    result.documents["report.pdf"] = RunReportService.generate(result.summary, cleaned, title=cfg.name)
    result.summary = {**result.summary, "command": "report", "solved": result.command}
    result.command = "report"
    return result


COMMANDS = {
    "validate": run_validate,
    "solve-global": run_solve_global,
    "solve-exterior": run_solve_exterior,
    "probe-green": run_probe_green,
    "oracle-compare": run_oracle_compare,
    "report": run_report,
}
