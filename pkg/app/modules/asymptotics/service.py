"""
Asymptotics Service v1.0
========================
Ajuste da expansão assintótica

    u(x) ≈ ½x′Ax + b·x + d·log√(x′Ax) + c + O(ρ^(−σ)),   ρ = √(x′Ax)

e relatório de resíduo da equação det(D²u) = f por raio.

Pipeline do ajuste:
  1. Amostra u em ρ ∈ janela (geométrico) × ângulos, com x = A^(−1/2)·ρω
  2. Mínimos quadrados lineares em {log ρ, 1} → (d, c)
  3. Refinamento por projeção variável com termo extra K·ρ^(−σ), σ ∈ [0.2, 6],
     sobre as médias angulares por raio
  4. Tabela sup_θ |resíduo| por raio e σ = −inclinação log-log

Autor: Ampere2D Engine
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from app.errors import FitWindowError
from app.modules.grid.polar import PolarField, cartesian_hessian, det_hessian
from app.modules.ingest.source import AffineData, SourceField

log = logging.getLogger("ampere2d.asymptotics")

# ────────────────────────────────────────────────────────────────
# CONSTANTES DO AJUSTE
# ────────────────────────────────────────────────────────────────
_COND_LIMIT = 1e10
_MIN_DECADE_RATIO = 10.0
_SIGMA_RANGE = (0.2, 6.0)
_SIGMA_SCAN = 59
_REFINE_GAIN = 4.0
_RESIDUAL_FLOOR = 1e-11
_DERIV_STEP = 1e-3

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class AsymptoticFit:
    d_fit: float
    c_fit: float
    sigma_fit: float
    window: tuple[float, float]
    residual_table: np.ndarray            # colunas (ρ, sup_θ |resíduo|)
    d_stderr: float = 0.0
    sigma_refined: float | None = None
    derivative_slope: float = math.nan     # inclinação de sup|∂_ρ resíduo| (só reportada)
    refined: bool = False

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual_table[:, 1])) if len(self.residual_table) else 0.0

    def to_dict(self) -> dict:
        def clean(v):
            return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v
        return {
            "d_fit": self.d_fit,
            "c_fit": self.c_fit,
            "sigma_fit": clean(self.sigma_fit),
            "window": [self.window[0], self.window[1]],
            "max_residual": self.max_residual,
            "d_stderr": self.d_stderr,
            "sigma_refined": clean(self.sigma_refined),
            "derivative_slope": clean(self.derivative_slope),
        }

    def table_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"rho": self.residual_table[:, 0], "residual": self.residual_table[:, 1]})


def default_window(r_max: float) -> tuple[float, float]:
    return (r_max / 8.0, r_max / 2.0)


def _decay_slope(rho: np.ndarray, values: np.ndarray, floor: float) -> float:
    keep = values > floor
    if keep.sum() < 2:
        return math.nan
    return float(-np.polyfit(np.log(rho[keep]), np.log(values[keep]), 1)[0])


def _varpro(rho: np.ndarray, means: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Projeção variável: para σ fixo, (d, c, K) por mínimos quadrados; σ pela menor soma de quadrados."""
    logr = np.log(rho)

    def solve(sigma: float) -> tuple[np.ndarray, float]:
        design = np.column_stack([logr, np.ones_like(rho), rho ** (-sigma)])
        coef, *_ = np.linalg.lstsq(design, means, rcond=None)
        return coef, float(np.sum((design @ coef - means) ** 2))

    grid = np.linspace(*_SIGMA_RANGE, _SIGMA_SCAN)
    costs = [solve(s)[1] for s in grid]
    k = int(np.argmin(costs))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    if hi > lo:
        best = minimize_scalar(lambda s: solve(s)[1], bounds=(lo, hi), method="bounded",
                               options={"xatol": 1e-8})
        sigma = float(best.x) if best.fun <= costs[k] else float(grid[k])
    else:
        sigma = float(grid[k])
    coef, cost = solve(sigma)
    return sigma, coef, cost


def fit_expansion(
    u: Evaluator,
    aff: AffineData | None = None,
    window: tuple[float, float] | None = None,
    *,
    r_max: float | None = None,
    n_radii: int = 48,
    n_angles: int = 64,
    refine: bool = True,
) -> AsymptoticFit:
    """
    Ajusta (d, c) e mede σ numa janela de ρ.

    Args:
        u: Avaliador u(x1, x2).
        aff: Dados afins (A, b); padrão identidade.
        window: (ρ_lo, ρ_hi); padrão [R_max/8, R_max/2].
        r_max: Raio de truncamento; obrigatório sem ``window``.

    Raises:
        FitWindowError: janela inválida, estreita (menos de uma década e diferente
            da padrão) ou equações normais mal condicionadas.
    """
    aff = aff or AffineData.identity()
    if window is None:
        if r_max is None:
            raise FitWindowError("Informe a janela de ajuste ou R_max.")
        window = default_window(r_max)
        is_default = True
    else:
        is_default = r_max is not None and np.allclose(window, default_window(r_max))
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise FitWindowError(f"Janela inválida [{lo:g}, {hi:g}].")
    if hi / lo < _MIN_DECADE_RATIO and not is_default:
        raise FitWindowError(f"Janela [{lo:g}, {hi:g}] cobre menos de uma década e não é a padrão.")

    rho = np.geomspace(lo, hi, n_radii)
    omega = 2.0 * np.pi * np.arange(n_angles) / n_angles

    def target_at(rr: np.ndarray) -> np.ndarray:
        y1 = rr[:, None] * np.cos(omega)[None, :]
        y2 = rr[:, None] * np.sin(omega)[None, :]
        m = aff.sqrtA_inv
        x1, x2 = m[0, 0] * y1 + m[0, 1] * y2, m[1, 0] * y1 + m[1, 1] * y2
        vals = np.asarray(u(x1, x2), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FitWindowError(f"u não avaliável em toda a janela [{lo:g}, {hi:g}].")
        return vals - 0.5 * rr[:, None] ** 2 - (aff.b[0] * x1 + aff.b[1] * x2)

    target = target_at(rho)
    logr = np.repeat(np.log(rho), n_angles)
    design = np.column_stack([logr, np.ones_like(logr)])
    cond = float(np.linalg.cond(design))
    if cond > _COND_LIMIT:
        raise FitWindowError(f"Equações normais mal condicionadas (cond={cond:.2e}).")
    coef, *_ = np.linalg.lstsq(design, target.ravel(), rcond=None)
    d_fit, c_fit = float(coef[0]), float(coef[1])
    resid = target.ravel() - design @ coef
    dof = max(len(resid) - 2, 1)
    cov = np.linalg.inv(design.T @ design) * float(resid @ resid) / dof
    d_stderr = float(math.sqrt(max(cov[0, 0], 0.0)))

    sigma_refined = None
    refined = False
    floor = _RESIDUAL_FLOOR * (1.0 + abs(c_fit) + abs(d_fit) * math.log(hi))
    if refine and float(np.max(np.abs(resid))) > floor:
        means = target.mean(axis=1)
        linear_cost = float(np.sum((means - d_fit * np.log(rho) - c_fit) ** 2))
        sigma, vcoef, cost = _varpro(rho, means)
        if cost * _REFINE_GAIN < linear_cost:
            d_fit, c_fit = float(vcoef[0]), float(vcoef[1])
            sigma_refined, refined = sigma, True
            log.debug("Ajuste refinado: σ=%.4g K=%.3g (custo %.2e → %.2e)", sigma, vcoef[2], linear_cost, cost)

    remainder = target - d_fit * np.log(rho)[:, None] - c_fit
    sup_res = np.max(np.abs(remainder), axis=1)
    sigma_fit = _decay_slope(rho, sup_res, floor)

    h = _DERIV_STEP
    upper = target_at(rho * (1 + h)) - d_fit * np.log(rho * (1 + h))[:, None] - c_fit
    lower = target_at(rho * (1 - h)) - d_fit * np.log(rho * (1 - h))[:, None] - c_fit
    deriv = np.max(np.abs(upper - lower), axis=1) / (2 * h * rho)
    derivative_slope = _decay_slope(rho, deriv, floor / lo)

    fit = AsymptoticFit(
        d_fit=d_fit,
        c_fit=c_fit,
        sigma_fit=sigma_fit,
        window=(lo, hi),
        residual_table=np.column_stack([rho, sup_res]),
        d_stderr=d_stderr,
        sigma_refined=sigma_refined,
        derivative_slope=derivative_slope,
        refined=refined,
    )
    log.info("Ajuste assintótico em [%.3g, %.3g]: d=%.8g c=%.8g σ=%.3g", lo, hi, d_fit, c_fit, sigma_fit)
    return fit


# ────────────────────────────────────────────────────────────────
# RESÍDUO DA EQUAÇÃO
# ────────────────────────────────────────────────────────────────

@dataclass
class ResidualReport:
    radii: np.ndarray
    residual: np.ndarray           # sup_θ |det(D²u) − f| por raio (NaN em linhas de contorno)
    max_residual: float
    tol: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.tol is None or self.max_residual <= self.tol

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.radii, "residual": self.residual})

    def summary(self) -> dict:
        return {"max_residual": self.max_residual, "tol": self.tol, "passed": self.passed, **self.extra}


def residual_report(solution: PolarField, f: SourceField, tol: float | None = None, **extra) -> ResidualReport:
    """Resíduo sup_θ |det(D²u) − f| por raio, apenas nas linhas internas da grade."""
    grid = solution.grid
    det = det_hessian(cartesian_hessian(solution))
    err = np.abs(det.values - grid.sample(f).values).max(axis=1)
    mask = grid.interior_mask()
    per_radius = np.where(mask, err, np.nan)
    max_res = float(np.nanmax(per_radius)) if mask.any() else 0.0
    report = ResidualReport(radii=grid.radii.copy(), residual=per_radius, max_residual=max_res, tol=tol,
                            extra=dict(extra))
    log.info("Resíduo da equação: max=%.3e (tol=%s)", max_res, tol)
    return report


def write_report(report: ResidualReport, out_dir: str | Path, stem: str = "residual") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{stem}.csv"
    report.frame().to_csv(csv_path, index=False, float_format="%.17g")
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True), encoding="utf-8")
    return csv_path, json_path


def observed_order(h: np.ndarray, errors: np.ndarray) -> float:
    """Ordem observada: inclinação de mínimos quadrados de log(erro) × log(h)."""
    h, errors = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    if len(h) < 2 or np.any(errors <= 0):
        raise ValueError("Estudo de ordem exige ≥ 2 pares com erro positivo.")
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])
