"""
Green Probe Service
===================
Sonda numérica da função de Green de L na grade truncada: resolve
L G = −δₓ com delta mollificada e ajusta as constantes

    c₂          = sup_y |G(x, y)| / (|log|x − y|| + 1)
    grad_bound  = sup_{|y| ≤ |x|/2} |∇_y G(x, y)| · |x| / log|x|

Diagnóstico apenas; os solves de produção invertem L diretamente.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from app.config import get_settings
from app.modules.elliptic.service import BoundarySpec, solve_linearized
from app.modules.grid.polar import PolarField, cartesian_gradient
from app.modules.radial.service import CoefficientField

log = logging.getLogger("ampere2d.elliptic.green")

_MOLLIFIER_CELLS = 2.0


@dataclass
class GreenProbe:
    x: tuple[float, float]
    values: PolarField
    c2_fit: float
    grad_bound_fit: float
    epsilon: float
    r0_heuristic: float
    refinement_table: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "c2_fit": self.c2_fit,
            "grad_bound_fit": self.grad_bound_fit,
            "refinement_table": self.refinement_table,
        }


def mollified_delta(grid, x: tuple[float, float]) -> tuple[PolarField, float]:
    """(1 − |y−x|²/ε²)³₊ normalizada pelos pesos de quadratura da grade; ε = 2 células."""
    rx = math.hypot(*x)
    i = int(np.clip(np.searchsorted(grid.radii, rx), 1, grid.n_r - 1))
    h_r = float(grid.radii[i] - grid.radii[i - 1])
    eps = _MOLLIFIER_CELLS * max(h_r, rx * 2.0 * math.pi / grid.n_theta)
    y1, y2 = grid.mesh
    dist2 = ((y1 - x[0]) ** 2 + (y2 - x[1]) ** 2) / eps**2
    bump = np.clip(1.0 - dist2, 0.0, None) ** 3
    mass = float(np.sum(grid.quadrature_weights[:, None] * bump))
    if mass <= 0:
        raise ValueError(f"Delta mollificada sem suporte na grade em x={x}.")
    return grid.field(bump / mass), eps


def _fit_constants(values: PolarField, x: tuple[float, float]) -> tuple[float, float]:
    grid = values.grid
    y1, y2 = grid.mesh
    dist = np.hypot(y1 - x[0], y2 - x[1])
    with np.errstate(divide="ignore"):
        denom = np.abs(np.log(np.where(dist > 0, dist, np.inf))) + 1.0
    c2 = float(np.max(np.abs(values.values) / denom))
    g1, g2 = cartesian_gradient(values)
    rx = math.hypot(*x)
    near = grid.radii <= rx / 2
    grad = np.hypot(g1.values, g2.values)[near]
    grad_bound = float(np.max(grad)) * rx / math.log(rx) if grad.size else 0.0
    return c2, grad_bound


def _probe_once(coeffs: CoefficientField, x: tuple[float, float]) -> tuple[PolarField, float, float, float]:
    delta, eps = mollified_delta(coeffs.grid, x)
    values = solve_linearized(coeffs, -delta, BoundarySpec())
    c2, grad_bound = _fit_constants(values, x)
    return values, c2, grad_bound, eps


def probe_green(
    coeffs: CoefficientField,
    x: tuple[float, float],
    *,
    refined: CoefficientField | None = None,
) -> GreenProbe:
    """
    Resolve L G = −δₓ (Dirichlet 0 em R_max) e ajusta c₂ e a cota do gradiente.

    Args:
        coeffs: Coeficientes na grade base.
        x: Ponto fonte; exige |x| > max(2R₀, 1), R₀ dado pela heurística de desvio.
        refined: Os mesmos coeficientes numa grade com n_θ dobrado e passo radial
            pela metade; quando presente, entra na tabela de refinamento.
    """
    threshold = get_settings().r0_threshold
    r0 = coeffs.deviation_radius(threshold)
    rx = math.hypot(*x)
    if rx <= max(2.0 * r0, 1.0):
        raise ValueError(f"|x|={rx:.4g} deve exceder max(2R₀, 1) com R₀={r0:.4g} (limiar {threshold}).")
    if rx >= coeffs.grid.r_max / 2:
        raise ValueError(f"|x|={rx:.4g} deve ficar abaixo de R_max/2.")

    values, c2, grad_bound, eps = _probe_once(coeffs, x)
    table = [{"n_r": coeffs.grid.n_r, "n_theta": coeffs.grid.n_theta, "c2_fit": c2, "grad_bound_fit": grad_bound}]
    if refined is not None:
        _, c2_ref, grad_ref, _ = _probe_once(refined, x)
        table.append({"n_r": refined.grid.n_r, "n_theta": refined.grid.n_theta,
                      "c2_fit": c2_ref, "grad_bound_fit": grad_ref})
    log.info("Sonda de Green em x=(%.3g, %.3g): c₂=%.4g grad=%.4g (R₀=%.3g)", x[0], x[1], c2, grad_bound, r0)
    return GreenProbe(x=(float(x[0]), float(x[1])), values=values, c2_fit=c2, grad_bound_fit=grad_bound,
                      epsilon=eps, r0_heuristic=r0, refinement_table=table)
