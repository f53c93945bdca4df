"""
Linear Elliptic Service v1.0
============================
Inversão de L ψ = a_ij ∂ᵢⱼψ + b_k ∂ₖψ = g na grade polar.

  • coeficientes radiais (vindos de U radial): um problema de contorno por modo
  • coeficientes gerais próximos de radiais: correção de defeito em torno do
    operador separável das médias angulares (p̄, q̄, s̄):

        L̄ ψₙ₊₁ = g − (L − L̄) ψₙ   até  |ψₙ₊₁ − ψₙ| / |ψₙ₊₁| < 1e−10

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.errors import NonPerturbativeCoefficientsError
from app.modules.elliptic.mode_solver import BoundaryCondition, ModeBVP, solve_modes
from app.modules.grid.polar import PolarField, PolarGrid, mode_decompose, theta_derivatives
from app.modules.radial.service import CoefficientField

log = logging.getLogger("ampere2d.elliptic")

# ────────────────────────────────────────────────────────────────
# CONSTANTES DA CORREÇÃO DE DEFEITO
# ────────────────────────────────────────────────────────────────
_DEFECT_TOL = 1e-10
_DEFECT_MAX_ITER = 200
_DIVERGENCE_STREAK = 3


@dataclass(frozen=True)
class BoundarySpec:
    """Dados de contorno de um solve linear (valores angulares nos n_θ nós)."""

    inner: np.ndarray | float = 0.0      # r₀ (grade exterior); ignorado com origem
    outer: np.ndarray | float = 0.0      # R_max
    far_field: Literal["dirichlet", "robin"] = "dirichlet"
    tau: float = 0.0

    def modes(self, grid: PolarGrid) -> tuple[np.ndarray, np.ndarray]:
        def coeffs(values):
            row = np.broadcast_to(np.asarray(values, dtype=float), (grid.n_theta,))
            return np.fft.rfft(row) / grid.n_theta
        return coeffs(self.inner), coeffs(self.outer)


def separable_apply(field: PolarField, p: np.ndarray, q: np.ndarray, s: np.ndarray | None = None) -> PolarField:
    """p ψ_rr + q(ψ_r/r + ψ_θθ/r²) + s ψ_r no espaço físico; na origem (p₀+q₀)·média(ψ_rr)."""
    grid = field.grid
    st = grid.stencil
    v = field.values
    ur, urr = st.apply(v, st.d1), st.apply(v, st.d2)
    _, utt = theta_derivatives(v)
    s = np.zeros(grid.n_r) if s is None else s
    r = grid.radii.copy()
    if grid.includes_origin:
        r[0] = 1.0
    out = p[:, None] * urr + (q / r + s)[:, None] * ur + (q / r**2)[:, None] * utt
    if grid.includes_origin:
        out[0] = (p[0] + q[0]) * float(np.mean(urr[0]))
    return grid.field(out)


def _solve_separable(
    grid: PolarGrid,
    p: np.ndarray,
    q: np.ndarray,
    s: np.ndarray,
    rhs: np.ndarray,
    bc: BoundarySpec,
) -> np.ndarray:
    n = grid.n_theta
    rhs_modes = np.fft.rfft(rhs, axis=1) / n
    inner, outer = bc.modes(grid)
    bvps = []
    for m in grid.modes:
        bc_in = BoundaryCondition.regular() if grid.includes_origin else BoundaryCondition.dirichlet(inner[m])
        if bc.far_field == "robin":
            bc_out = BoundaryCondition.robin(bc.tau, outer[m])
        else:
            bc_out = BoundaryCondition.dirichlet(outer[m])
        bvps.append(ModeBVP(m=int(m), grid=grid, p=p, q=q, rhs=rhs_modes[:, m],
                            bc_inner=bc_in, bc_outer=bc_out, s=s))
    sols = solve_modes(bvps)
    coeffs = np.column_stack(sols).astype(complex)
    values = np.fft.irfft(coeffs * n, n=n, axis=1)
    if grid.includes_origin:
        values[0] = values[0].mean()
    return values


def residual(coeffs: CoefficientField, psi: PolarField, g: PolarField) -> float:
    """sup |Lψ − g| nos nós internos."""
    mask = coeffs.grid.interior_mask()
    return (coeffs.apply(psi) - g).sup(mask)


def solve_linearized(
    coeffs: CoefficientField,
    g: PolarField,
    bc: BoundarySpec | None = None,
) -> PolarField:
    """
    Resolve L ψ = g com os dados de contorno ``bc``.

    Returns:
        PolarField com ``meta`` = {residual, iterations, ratios, delta_a}.

    Raises:
        IllPosedModeError: fatoração singular em algum modo.
        NonPerturbativeCoefficientsError: razão de atualização ≥ 1 por 3
            passos seguidos (ou limite de iterações).
    """
    grid = coeffs.grid
    bc = bc or BoundarySpec()
    p, q, s = coeffs.radial_part()
    s = np.zeros(grid.n_r) if s is None else s
    psi = grid.field(_solve_separable(grid, p, q, s, g.values, bc))
    ratios: list[float] = []
    iterations = 0
    delta_a = 0.0

    if coeffs.radial is None:
        a_rr, a_tt, a_rt, _ = coeffs.polar_components()
        delta_a = float(max(np.max(np.abs(a_rr - p[:, None])), np.max(np.abs(a_tt - q[:, None])),
                            np.max(np.abs(a_rt))))
        prev_delta = None
        streak = 0
        while True:
            iterations += 1
            defect = coeffs.apply(psi) - separable_apply(psi, p, q, s)
            new = grid.field(_solve_separable(grid, p, q, s, (g - defect).values, bc))
            delta = (new - psi).sup()
            scale = max(new.sup(), 1e-300)
            psi = new
            if prev_delta is not None and prev_delta > 0:
                ratio = delta / prev_delta
                ratios.append(ratio)
                streak = streak + 1 if ratio >= 1.0 else 0
                if streak >= _DIVERGENCE_STREAK:
                    raise NonPerturbativeCoefficientsError(
                        f"Correção de defeito divergiu (‖δa‖∞={delta_a:.3g}).", ratios)
            prev_delta = delta
            if delta / scale < _DEFECT_TOL or delta == 0.0:
                break
            if iterations >= _DEFECT_MAX_ITER:
                raise NonPerturbativeCoefficientsError(
                    f"Correção de defeito sem convergência em {_DEFECT_MAX_ITER} iterações.", ratios)
        log.debug("Correção de defeito: %d iterações, ‖δa‖∞=%.3g, razão média %.3g",
                  iterations, delta_a, float(np.mean(ratios)) if ratios else 0.0)

    res = residual(coeffs, psi, g)
    return grid.field(psi.values, residual=res, iterations=iterations, ratios=ratios, delta_a=delta_a)


def mode_content(field: PolarField, tol: float = 1e-12) -> list[int]:
    """Modos angulares com amplitude relevante (diagnóstico)."""
    amp = np.max(np.abs(mode_decompose(field)), axis=0)
    scale = max(float(amp.max()), 1e-300)
    return [int(m) for m in np.nonzero(amp > tol * scale)[0]]
