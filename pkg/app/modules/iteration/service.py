"""
Global Iteration Service v1.0
=============================
Construção da solução global de det(D²u) = f em ℝ²:

    v = U + φ,   L φ⁰ = f₁ − f̃₁
    L ψˡ = div F(φˡ⁻²) − div F(φˡ⁻¹),   φˡ = φˡ⁻¹ + ψˡ   (φ⁻¹ = 0)

onde L = a*ᵢⱼ∂ᵢⱼ é o linearizado em U e F(φ) = (∂₁φ ∂₂₂φ, −∂₁₂φ ∂₁φ) é o
par de fluxos com det D²φ = div F(φ). A parada usa a norma
sup (1+r)^τ |ψˡ| < tol.

A solução final é u(x) = v(A^(1/2)x) + b·x + shift, com shift escolhido
para que a constante assintótica seja a constante c prescrita.

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from app.errors import IterationBreakdownError, NonConvergenceError
from app.modules.asymptotics.service import AsymptoticFit, fit_expansion
from app.modules.elliptic.service import BoundarySpec, solve_linearized
from app.modules.grid.polar import (
    HessianField,
    PolarField,
    PolarGrid,
    cartesian_hessian,
    det_hessian,
    divergence_flux,
    flux_divergence,
)
from app.modules.ingest.service import RadialTable, normalize_source, spherical_average
from app.modules.ingest.source import AffineData, SourceField
from app.modules.radial.service import CoefficientField, RadialProfile, build_coefficients, build_radial_solution

log = logging.getLogger("ampere2d.iteration")

_DEFAULT_L_MAX = 40
_MIN_AVERAGE_ANGLES = 64


def default_tau(beta: float) -> float:
    """τ = 0.9·min(β/2 − 1, 1)."""
    return 0.9 * min(beta / 2.0 - 1.0, 1.0)


@dataclass
class IterationState:
    level: int
    phi: PolarField
    psi: PolarField
    phi_prev: PolarField
    tau: float
    history: list[dict] = field(default_factory=list)
    alpha_holder: float = 0.5

    @property
    def weighted_sup(self) -> float:
        return self.history[-1]["weighted_sup"] if self.history else math.inf


@dataclass
class GlobalSolution:
    v: PolarField
    profile: RadialProfile
    coeffs: CoefficientField
    aff: AffineData
    f1: SourceField
    shift: float
    fit: AsymptoticFit
    history: list[dict]
    converged: bool = True

    @property
    def grid(self) -> PolarGrid:
        return self.v.grid

    @property
    def levels(self) -> int:
        return len(self.history)

    def u_eval(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """u(x) = v(A^(1/2)x) + b·x + shift (interpolação bicúbica de v)."""
        interp = self.v.interpolator()
        m, b, shift = self.aff.sqrtA, self.aff.b, self.shift

        def u(x1, x2):
            x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
            y1, y2 = m[0, 0] * x1 + m[0, 1] * x2, m[1, 0] * x1 + m[1, 1] * x2
            return interp(y1, y2) + b[0] * x1 + b[1] * x2 + shift

        return u

    def summary(self) -> dict:
        return {
            "d": self.profile.d,
            "c_d": self.profile.c_d,
            "c_shift": self.shift,
            "levels": self.levels,
            "converged": self.converged,
            "fit": self.fit.to_dict(),
        }


# ────────────────────────────────────────────────────────────────
# OPERAÇÕES
# ────────────────────────────────────────────────────────────────

def initial_correction(
    coeffs: CoefficientField,
    f1: PolarField,
    ftilde: RadialTable | None = None,
    *,
    bc: BoundarySpec | None = None,
    tau: float = 0.9,
) -> PolarField:
    """
    φ⁰ com L φ⁰ = f₁ − média angular de f₁ na grade (o modo 0 do lado direito é nulo).

    ``ftilde`` só entra no log, comparando a média discreta com a tabela radial.
    """
    mean = f1.values.mean(axis=1, keepdims=True)
    rhs = f1.grid.field(f1.values - mean)
    if ftilde is not None:
        sl = slice(len(ftilde.r) - f1.grid.n_r, None)
        drift = float(np.max(np.abs(mean[:, 0] - ftilde.values[sl]))) if len(ftilde.r) >= f1.grid.n_r else math.nan
        log.debug("Média angular na grade × f̃₁ tabelada: %.2e", drift)
    phi0 = solve_linearized(coeffs, rhs, bc)
    log.info("φ⁰: sup=%.3e, sup(1+r)^τ=%.3e", phi0.sup(), phi0.weighted_sup(tau))
    return phi0


def _equation_residual(h_total: HessianField, f1_grid: PolarField) -> float:
    mask = f1_grid.grid.interior_mask()
    return (det_hessian(h_total) - f1_grid).sup(mask)


def check_convexity(h_total: HessianField, level: int) -> None:
    eig = h_total.min_eigenvalue()
    mask = h_total.u11.grid.interior_mask()
    eig_in = np.where(mask[:, None], eig, np.inf)
    if np.min(eig_in) <= 0:
        node = np.unravel_index(int(np.argmin(eig_in)), eig_in.shape)
        raise IterationBreakdownError(level, (int(node[0]), int(node[1])), float(eig_in[node]))


def picard_step(
    state: IterationState,
    coeffs: CoefficientField,
    profile: RadialProfile | None,
    *,
    hess_u: HessianField,
    f1_grid: PolarField,
    bc: BoundarySpec | None = None,
) -> IterationState:
    """
    Um nível da cascata: L ψˡ = div F(φˡ⁻²) − div F(φˡ⁻¹), φˡ = φˡ⁻¹ + ψˡ.

    Raises:
        IterationBreakdownError: U + φˡ deixou de ser convexa em algum nó.
    """
    level = state.level + 1
    flux_prev = divergence_flux(cartesian_hessian(state.phi_prev))
    flux_cur = divergence_flux(cartesian_hessian(state.phi))
    rhs = flux_divergence((flux_prev[0] - flux_cur[0], flux_prev[1] - flux_cur[1]))
    psi = solve_linearized(coeffs, rhs, bc)
    phi = state.phi + psi
    h_total = hess_u + cartesian_hessian(phi)
    check_convexity(h_total, level)
    entry = {
        "l": level,
        "sup_psi": psi.sup(),
        "weighted_sup": psi.weighted_sup(state.tau),
        "residual": _equation_residual(h_total, f1_grid),
        "solver_residual": float(psi.meta.get("residual", 0.0)),
    }
    log.debug("Nível %d: sup ψ=%.3e ponderado=%.3e resíduo=%.3e", level, entry["sup_psi"],
              entry["weighted_sup"], entry["residual"])
    return IterationState(level=level, phi=phi, psi=psi, phi_prev=state.phi, tau=state.tau,
                          history=[*state.history, entry], alpha_holder=state.alpha_holder)


def solve_global(
    f: SourceField,
    aff: AffineData | None,
    grid: PolarGrid,
    tol: float = 1e-10,
    *,
    tau: float | None = None,
    l_max: int = _DEFAULT_L_MAX,
    far_field: Literal["dirichlet", "robin"] = "dirichlet",
    fit_window: tuple[float, float] | None = None,
) -> GlobalSolution:
    """
    Resolve det(D²u) = f em ℝ² com u ~ ½x′Ax + b·x + d·log√(x′Ax) + c.

    Raises:
        NonConvergenceError: l_max níveis sem atingir ``tol`` (com histórico).
        IterationBreakdownError: perda de convexidade.
    """
    if grid.kind != "global":
        raise ValueError(f"solve_global exige grade global (recebeu {grid.kind!r}).")
    aff = aff or AffineData.identity()
    tau = default_tau(f.beta) if tau is None else tau
    bc = BoundarySpec(far_field=far_field, tau=tau)

    f1 = normalize_source(f, aff)
    ftilde = spherical_average(f1, grid.radii, n_theta=max(grid.n_theta, _MIN_AVERAGE_ANGLES))
    profile = build_radial_solution(ftilde)
    coeffs = build_coefficients(profile, grid)
    f1_grid = grid.sample(f1)
    u_field = profile.field(grid)
    hess_u = cartesian_hessian(u_field)

    phi0 = initial_correction(coeffs, f1_grid, ftilde, bc=bc, tau=tau)
    state = IterationState(level=0, phi=phi0, psi=phi0, phi_prev=grid.field(0.0), tau=tau)
    h0 = hess_u + cartesian_hessian(phi0)
    check_convexity(h0, 0)
    state.history.append({"l": 0, "sup_psi": phi0.sup(), "weighted_sup": phi0.weighted_sup(tau),
                          "residual": _equation_residual(h0, f1_grid),
                          "solver_residual": float(phi0.meta.get("residual", 0.0))})

    converged = False
    while state.level < l_max:
        state = picard_step(state, coeffs, profile, hess_u=hess_u, f1_grid=f1_grid, bc=bc)
        if state.weighted_sup < tol:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(
            f"Sem convergência em {l_max} níveis (último sup ponderado {state.weighted_sup:.3e} ≥ tol={tol:.1e}).",
            state.history,
        )

    v = u_field + state.phi
    v_fit = fit_expansion(v.interpolator(), None, fit_window, r_max=grid.r_max)
    shift = aff.c - v_fit.c_fit
    solution = GlobalSolution(v=v, profile=profile, coeffs=coeffs, aff=aff, f1=f1, shift=shift,
                              fit=v_fit, history=state.history, converged=True)
    solution.fit = fit_expansion(solution.u_eval(), aff, fit_window, r_max=grid.r_max)
    log.info("Solução global: %d níveis, d=%.8g d_fit=%.8g c_fit=%.8g", state.level, profile.d,
             solution.fit.d_fit, solution.fit.c_fit)
    return solution


def certify_truncation(
    f: SourceField,
    aff: AffineData | None,
    base: GlobalSolution,
    tol: float = 1e-10,
    *,
    knee: float | None = None,
    **kwargs,
) -> dict:
    """
    Repete o solve numa grade com R_max dobrado (mesmo joelho e mesma razão
    geométrica) e reporta a variação de d_fit e c_fit na janela da grade base.

    O joelho é lido da grade base quando ``knee`` não é informado.

    Raises:
        ValueError: grade base sem joelho detectável e ``knee`` ausente.
    """
    grid = base.grid
    knee = grid.knee if knee is None else knee
    if knee is None or knee <= 0.0:
        raise ValueError("Grade base sem joelho (passo constante); informe knee explicitamente.")
    q = grid.radii[-1] / grid.radii[-2]
    extra = int(round(math.log(2.0) / math.log(q)))
    doubled = PolarGrid.graded(grid.n_r + extra, 2.0 * grid.r_max, grid.n_theta, "global", r0=knee)
    window = base.fit.window
    other = solve_global(f, aff, doubled, tol, fit_window=window, **kwargs)
    report = {
        "r_max": grid.r_max,
        "r_max_doubled": doubled.r_max,
        "delta_d_fit": abs(other.fit.d_fit - base.fit.d_fit),
        "delta_c_fit": abs(other.fit.c_fit - base.fit.c_fit),
    }
    log.info("Certificado de truncamento: Δd=%.2e Δc=%.2e", report["delta_d_fit"], report["delta_c_fit"])
    return report
