"""
Kelvin Transform
================
Transformação y = x/|x|² do exterior |x| > r₀ no disco |y| < 1/r₀.

Se a_ij ∂ᵢⱼψ = g em x, então ψ̃(y) = ψ(y/|y|²) satisfaz

    b_kl ∂_kl ψ̃ + b_k ∂_k ψ̃ = |y|⁻⁴ g(y/|y|²)

com b = M a M,  M = I − 2yyᵀ/|y|²  (reflexão ortogonal) e

    b_k = a_ij H^k_ij / |y|⁴,
    H^k_ij = |y|²(−2δ_ki y_j − 2δ_kj y_i − 2δ_ij y_k) + 8 y_i y_j y_k.

Em y = 0 vale o limite por continuidade: b = I, b_k = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from app.modules.grid.polar import PolarField, PolarGrid
from app.modules.radial.service import CoefficientField

log = logging.getLogger("ampere2d.exterior.kelvin")

MatrixEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

_ORIGIN_EPS = 1e-300


def _reflection(y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    n2 = np.maximum(y1 * y1 + y2 * y2, _ORIGIN_EPS)
    m = np.empty(y1.shape + (2, 2))
    m[..., 0, 0] = 1.0 - 2.0 * y1 * y1 / n2
    m[..., 1, 1] = 1.0 - 2.0 * y2 * y2 / n2
    m[..., 0, 1] = m[..., 1, 0] = -2.0 * y1 * y2 / n2
    return m


def kelvin_matrix(a: np.ndarray, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    """b = M a M (a com forma (..., 2, 2))."""
    m = _reflection(y1, y2)
    b = m @ a @ m
    origin = (y1 == 0) & (y2 == 0)
    if np.any(origin):
        b[origin] = np.eye(2)
    return b


def kelvin_drift(a: np.ndarray, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    """b_k = a_ij H^k_ij / |y|⁴ (forma (..., 2))."""
    y = np.stack([y1, y2], axis=-1)
    n2 = y1 * y1 + y2 * y2
    safe = np.where(n2 > 0, n2, 1.0)
    eye = np.eye(2)
    out = np.zeros(y1.shape + (2,))
    for k in range(2):
        yk = y[..., k]
        h = np.zeros(y1.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                h[..., i, j] = (n2 * (-2.0 * eye[k, i] * y[..., j] - 2.0 * eye[k, j] * y[..., i]
                                      - 2.0 * eye[i, j] * yk)
                                + 8.0 * y[..., i] * y[..., j] * yk)
        out[..., k] = np.einsum("...ij,...ij->...", a, h) / safe**2
    out[n2 == 0] = 0.0
    return out


def kelvin_coefficients(a_eval: MatrixEvaluator, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    (b_matrix, b_vector) no(s) ponto(s) y, com a avaliado na pré-imagem x = y/|y|².

    Args:
        a_eval: a(x1, x2) → matriz (..., 2, 2).
        y: pontos (..., 2).
    """
    y = np.asarray(y, dtype=float)
    y1, y2 = y[..., 0], y[..., 1]
    n2 = y1 * y1 + y2 * y2
    safe = np.where(n2 > 0, n2, 1.0)
    a = np.asarray(a_eval(y1 / safe, y2 / safe), dtype=float)
    a = np.where((n2 == 0)[..., None, None], np.eye(2), a)
    return kelvin_matrix(a, y1, y2), kelvin_drift(a, y1, y2)


@dataclass(frozen=True, eq=False)
class KelvinCoefficients:
    """Coeficientes transformados no disco B_{1/r₀}."""

    a_eval: MatrixEvaluator
    r0: float

    @property
    def domain_radius(self) -> float:
        return 1.0 / self.r0

    def b_matrix(self, y1, y2) -> np.ndarray:
        return kelvin_coefficients(self.a_eval, np.stack(np.broadcast_arrays(y1, y2), axis=-1))[0]

    def b_vector(self, y1, y2) -> np.ndarray:
        return kelvin_coefficients(self.a_eval, np.stack(np.broadcast_arrays(y1, y2), axis=-1))[1]


# ────────────────────────────────────────────────────────────────
# GRADE DO DISCO DE KELVIN
# ────────────────────────────────────────────────────────────────

def kelvin_disk_grid(exterior: PolarGrid) -> tuple[PolarGrid, int]:
    """
    Disco B_{1/r₀}: preenchimento uniforme de [0, 1/R_max) seguido dos nós 1/rᵢ
    da grade exterior em ordem reversa (os nós exteriores têm imagem exata).

    Returns:
        (grade do disco, número de nós de preenchimento)
    """
    if exterior.kind != "exterior":
        raise ValueError("kelvin_disk_grid exige grade exterior.")
    r = exterior.radii
    q = r[-1] / r[-2]
    n_fill = max(2, int(round(1.0 / (q - 1.0))))
    rho_min = 1.0 / r[-1]
    fill = np.linspace(0.0, rho_min, n_fill + 1)[:-1]
    radii = np.concatenate([fill, (1.0 / r)[::-1]])
    return PolarGrid(radii=radii, n_theta=exterior.n_theta, kind="disk"), n_fill


def to_exterior(disk_field: PolarField, exterior: PolarGrid, n_fill: int) -> PolarField:
    """ψ(rᵢ, θ) = ψ̃(1/rᵢ, θ) pela correspondência de índices."""
    return exterior.field(disk_field.values[n_fill:][::-1])


def kelvin_field(coeffs: CoefficientField, disk: PolarGrid, n_fill: int) -> CoefficientField:
    """
    CoefficientField de (b_kl, b_k) na grade do disco a partir dos coeficientes
    na grade exterior; nos nós de preenchimento (|x| > R_max) usa a forma
    assintótica radial p = 1 + d/r², q = 1 − d/r².
    """
    exterior = coeffs.grid
    n_ext = exterior.n_r
    a = np.empty(disk.shape + (2, 2))
    a[n_fill:, :, 0, 0] = coeffs.a11.values[::-1]
    a[n_fill:, :, 1, 1] = coeffs.a22.values[::-1]
    a[n_fill:, :, 0, 1] = a[n_fill:, :, 1, 0] = coeffs.a12.values[::-1]

    y1, y2 = disk.mesh
    d = coeffs.far_field_d
    rho = disk.radii[:n_fill, None]
    th = disk.theta[None, :]
    safe = np.where(rho > 0, rho, 1.0)
    p = 1.0 + d * safe**2
    q = 1.0 - d * safe**2
    c, s = np.cos(th), np.sin(th)
    a[:n_fill, :, 0, 0] = p * c * c + q * s * s
    a[:n_fill, :, 1, 1] = p * s * s + q * c * c
    a[:n_fill, :, 0, 1] = a[:n_fill, :, 1, 0] = (p - q) * s * c
    a[0] = np.eye(2)

    b = kelvin_matrix(a, y1, y2)
    drift = kelvin_drift(a, y1, y2)
    b[0], drift[0] = np.eye(2), 0.0
    if disk.n_r != n_fill + n_ext:
        raise ValueError("Grade do disco incompatível com a grade exterior.")
    field = CoefficientField.from_components(
        disk.field(b[..., 0, 0]), disk.field(b[..., 0, 1]), disk.field(b[..., 1, 1]),
        b1=disk.field(drift[..., 0]), b2=disk.field(drift[..., 1]),
    )
    log.debug("Coeficientes de Kelvin: λ ∈ [%.4g, %.4g] em %d nós", field.lambda_min, field.lambda_max, disk.n_r)
    return field
