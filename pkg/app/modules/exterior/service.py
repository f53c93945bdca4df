"""
Exterior Dirichlet Service v1.0
===============================
Problema exterior det(D²u) = f em |x| > r₀, u = φ em ∂B_{r₀},
u ~ ½|x|² + d·log|x| + c com d prescrito:

  1. extensão de f ao disco B_{r₀} com massa total d_target
  2. solução global V da fonte estendida
  3. normalização: V + const tem média igual à de φ em ∂B_{r₀}
  4. ψ₀: L ψ₀ = 0, ψ₀ = φ − V no contorno (variáveis de Kelvin, disco B_{1/r₀})
  5. cascata L ψ_k = det D²h_{k−2} − det D²h_{k−1} no anel, h = Σ ψ_k

c_d sai do ajuste assintótico, nunca é prescrito.

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.optimize import brentq

from app.config import get_settings
from app.errors import BoundaryConsistencyError, ExtensionInfeasibleError, NonConvergenceError, ValidationFailedError
from app.modules.asymptotics.service import AsymptoticFit, fit_expansion
from app.modules.elliptic.service import BoundarySpec, solve_linearized
from app.modules.exterior.kelvin import kelvin_disk_grid, kelvin_field, to_exterior
from app.modules.grid.polar import HessianField, PolarField, PolarGrid, cartesian_gradient, cartesian_hessian, det_hessian
from app.modules.ingest.service import SourceValidationService, annulus_mass
from app.modules.ingest.source import BoundaryData, ExteriorSpec, SourceField
from app.modules.iteration.service import GlobalSolution, check_convexity, default_tau, solve_global
from app.modules.radial.service import CoefficientField, coefficients_from_hessian

log = logging.getLogger("ampere2d.exterior")

# ────────────────────────────────────────────────────────────────
# PERFIS DA EXTENSÃO
# ────────────────────────────────────────────────────────────────
_BLEND_START = 0.8                # transição C² em [0.8r₀, r₀]
_POSITIVITY_FACTOR = 0.5          # f_ext ≥ 1/(2c₀)
_BOUNDARY_FACTOR = 10.0
_DEFAULT_K_MAX = 40
_SCAN_RADII = 201
_SCAN_ANGLES = 64

BumpName = Literal["cubic", "quartic"]

# χ(t) e ∫₀¹ t·χ(t) dt
BUMP_PROFILES: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "cubic": (lambda t: np.clip(1.0 - t * t, 0.0, None) ** 3, 1.0 / 8.0),
    "quartic": (lambda t: np.clip(1.0 - t * t, 0.0, None) ** 4, 1.0 / 10.0),
}


def _blend(t: np.ndarray) -> np.ndarray:
    """Smoothstep 6s⁵ − 15s⁴ + 10s³ com s = (t − 0.8)/0.2."""
    s = np.clip((t - _BLEND_START) / (1.0 - _BLEND_START), 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _extension(f: SourceField, r0: float, gamma: float, chi) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def f_ext(x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        t = np.hypot(x1, x2) / r0
        base = f(x1, x2)
        inner = 1.0 + _blend(t) * (base - 1.0) + gamma * chi(t)
        return np.where(t < 1.0, inner, base)

    return f_ext


def extend_source(
    f: SourceField,
    r0: float,
    d_target: float,
    *,
    profile: BumpName = "cubic",
    r_max: float = 64.0,
) -> SourceField:
    """
    Estende f ao disco B_{r₀} mantendo f fora dele:

        f_ext = 1 + w(|x|/r₀)(f − 1) + γ·χ(|x|/r₀)   em |x| < r₀

    com w a transição C² e γ obtido por busca de raiz de
    (1/2π)∫(f_ext − 1) = d_target (massa exterior truncada em ``r_max``).

    Raises:
        ExtensionInfeasibleError: f_ext < 1/(2c₀) em algum ponto amostrado.
    """
    if profile not in BUMP_PROFILES:
        raise ValueError(f"Perfil de extensão desconhecido: {profile!r} (use {sorted(BUMP_PROFILES)}).")
    chi, chi_moment = BUMP_PROFILES[profile]
    outer_mass = SourceValidationService.exterior_mass(f, r0, r_max)
    blend_mass = annulus_mass(_extension(f, r0, 0.0, chi), _BLEND_START * r0, r0)
    bump_mass = r0 * r0 * chi_moment

    def mismatch(gamma: float) -> float:
        return outer_mass + blend_mass + gamma * bump_mass - d_target

    span = 1.0 + 2.0 * abs(mismatch(0.0)) / bump_mass
    gamma = 0.0 if mismatch(0.0) == 0.0 else float(brentq(mismatch, -span, span, xtol=1e-15, rtol=1e-14))

    f_ext = _extension(f, r0, gamma, chi)
    t = np.linspace(0.0, 1.0, _SCAN_RADII)[:, None] * r0
    th = 2.0 * np.pi * np.arange(_SCAN_ANGLES) / _SCAN_ANGLES
    inside = f_ext(t * np.cos(th), t * np.sin(th))
    floor = _POSITIVITY_FACTOR / f.c0
    if float(inside.min()) < floor:
        raise ExtensionInfeasibleError(
            f"Extensão com γ={gamma:.6g} atinge f_ext={float(inside.min()):.4g} < 1/(2c₀)={floor:.4g}: "
            f"d_target={d_target:g} negativo demais para r₀={r0:g}."
        )
    c0_ext = float(max(f.c0, inside.max(), 1.0 / inside.min()))
    params = {
        **f.params,
        "gamma": gamma,
        "r0": r0,
        "profile": profile,
        "mass": outer_mass + blend_mass + gamma * bump_mass,
        "c0_ext": c0_ext,
        "f_ext_min": float(inside.min()),
        "f_ext_max": float(inside.max()),
    }
    log.info("Extensão (%s) em B_%.3g: γ=%.8g, massa exterior=%.6g, c₀′=%.4g", profile, r0, gamma, outer_mass, c0_ext)
    return SourceField(eval=f_ext, c0=c0_ext, beta=f.beta, k_smooth=f.k_smooth, name=f"{f.name}+ext", params=params)


# ────────────────────────────────────────────────────────────────
# NORMALIZAÇÃO DO CONTORNO
# ────────────────────────────────────────────────────────────────

@dataclass
class BoundaryOffset:
    shift: float
    theta: np.ndarray
    offset: np.ndarray            # φ − V − shift nos n_θ nós do anel
    sup: float
    holder: float
    alpha: float

    def to_dict(self) -> dict:
        return {"shift": self.shift, "offset_sup": self.sup, "offset_holder": self.holder, "alpha": self.alpha}


def normalize_boundary(solution: GlobalSolution, spec: ExteriorSpec) -> BoundaryOffset:
    """Desloca V pela média de φ − V em ∂B_{r₀} e mede o resíduo (sup e seminorma de Hölder)."""
    grid = solution.grid
    _, i0 = grid.restrict(spec.r0)
    theta = grid.theta
    diff = spec.boundary_data(theta) - solution.v.values[i0]
    shift = float(diff.mean())
    offset = diff - shift
    trace = BoundaryData(eval=lambda th: np.interp(np.mod(th, 2 * np.pi), theta, offset, period=2 * np.pi),
                         name="offset")
    holder = SourceValidationService.holder_seminorm(trace, spec.r0, spec.alpha, n_samples=grid.n_theta)
    report = BoundaryOffset(shift=shift, theta=theta.copy(), offset=offset, sup=float(np.max(np.abs(offset))),
                            holder=holder, alpha=spec.alpha)
    log.info("Contorno normalizado: shift=%.8g, sup offset=%.3e, [offset]_α=%.3e", shift, report.sup, holder)
    return report


# ────────────────────────────────────────────────────────────────
# CASCATA EXTERIOR
# ────────────────────────────────────────────────────────────────

@dataclass
class ExteriorState:
    k: int
    h: PolarField
    psi_k: PolarField
    h_prev: PolarField
    tau: float
    history: list[dict] = field(default_factory=list)
    boundary_error: float = math.nan

    @property
    def weighted_sup(self) -> float:
        return self.history[-1]["weighted_sup"] if self.history else math.inf


@dataclass
class ExteriorSolution:
    u: PolarField                 # V + shift + h na grade exterior
    base: GlobalSolution
    f_ext: SourceField
    offset: BoundaryOffset
    psi0: PolarField
    state: ExteriorState
    fit: AsymptoticFit
    d_target: float
    delta_a: float = 0.0

    @property
    def grid(self) -> PolarGrid:
        return self.u.grid

    def u_eval(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        return self.u.interpolator()

    def summary(self) -> dict:
        return {
            "d_target": self.d_target,
            "d_fit": self.fit.d_fit,
            "c_d": self.fit.c_fit,
            "boundary_error": self.state.boundary_error,
            "cascade_history": self.state.history,
            "gamma": self.f_ext.params.get("gamma"),
            "profile": self.f_ext.params.get("profile"),
            "delta_a": self.delta_a,
            "psi0_decay": decay_slopes(self.psi0, self.fit.window),
            **self.offset.to_dict(),
            "fit": self.fit.to_dict(),
        }


def _restrict(field: PolarField, grid: PolarGrid, i0: int) -> PolarField:
    return grid.field(field.values[i0:])


def _restrict_hessian(h: HessianField, grid: PolarGrid, i0: int) -> HessianField:
    return HessianField(_restrict(h.u11, grid, i0), _restrict(h.u12, grid, i0), _restrict(h.u22, grid, i0))


def solve_psi0(coeffs: CoefficientField, offset: BoundaryOffset) -> PolarField:
    """
    L ψ₀ = 0 em |x| > r₀ com ψ₀ = offset em ∂B_{r₀}, resolvido no disco de Kelvin
    (regularidade em y = 0 corresponde a ψ₀ limitada no infinito).
    """
    exterior = coeffs.grid
    disk, n_fill = kelvin_disk_grid(exterior)
    disk_coeffs = kelvin_field(coeffs, disk, n_fill)
    solved = solve_linearized(disk_coeffs, disk.field(0.0), BoundarySpec(outer=offset.offset))
    psi0 = to_exterior(solved, exterior, n_fill)
    log.info("ψ₀ (Kelvin, %d nós no disco): sup=%.3e, ‖δa‖∞=%.3g", disk.n_r, psi0.sup(),
             float(solved.meta.get("delta_a", 0.0)))
    return exterior.field(psi0.values, **solved.meta)


def exterior_step(state: ExteriorState, coeffs: CoefficientField, hess_v: HessianField) -> ExteriorState:
    """Um nível: L ψ_k = det D²h_{k−2} − det D²h_{k−1}, ψ_k = 0 em r₀ e R_max."""
    k = state.k + 1
    rhs = det_hessian(cartesian_hessian(state.h_prev)) - det_hessian(cartesian_hessian(state.h))
    psi = solve_linearized(coeffs, rhs, BoundarySpec())
    h = state.h + psi
    check_convexity(hess_v + cartesian_hessian(h), k)
    sup_prev = state.history[-1]["sup_psi"] if state.history else math.nan
    entry = {
        "k": k,
        "sup_psi": psi.sup(),
        "weighted_sup": psi.weighted_sup(state.tau),
        "ratio": psi.sup() / sup_prev if sup_prev and sup_prev > 0 else None,
    }
    log.debug("Cascata exterior k=%d: sup ψ=%.3e ponderado=%.3e", k, entry["sup_psi"], entry["weighted_sup"])
    return ExteriorState(k=k, h=h, psi_k=psi, h_prev=state.h, tau=state.tau, history=[*state.history, entry])


def decay_slopes(psi: PolarField, window: tuple[float, float]) -> dict:
    """Inclinações log-log de sup_θ|D^m ψ| (m = 0, 1, 2) na janela; apenas reportadas."""
    grid = psi.grid
    keep = (grid.radii >= window[0]) & (grid.radii <= window[1])
    g1, g2 = cartesian_gradient(psi)
    h = cartesian_hessian(psi)
    norms = {
        0: np.abs(psi.values),
        1: np.hypot(g1.values, g2.values),
        2: np.sqrt(h.u11.values**2 + 2 * h.u12.values**2 + h.u22.values**2),
    }
    out = {}
    for m, values in norms.items():
        sup = values.max(axis=1)[keep]
        ok = sup > 1e-14
        out[f"m{m}"] = (float(np.polyfit(np.log(grid.radii[keep][ok]), np.log(sup[ok]), 1)[0])
                        if ok.sum() >= 2 else None)
    return out


def solve_exterior(
    spec: ExteriorSpec,
    f: SourceField,
    grid: PolarGrid,
    tol: float = 1e-10,
    *,
    profile: BumpName = "cubic",
    tau: float | None = None,
    k_max: int = _DEFAULT_K_MAX,
    fit_window: tuple[float, float] | None = None,
    eps0_threshold: float | None = None,
) -> ExteriorSolution:
    """
    Resolve o problema exterior na grade global ``grid`` (r₀ deve ser nó; a
    cascata usa a restrição exterior).

    Raises:
        ValidationFailedError: d_target inadmissível, φ ou offset com seminorma acima de ε₀.
        ExtensionInfeasibleError: nenhuma extensão positiva.
        NonConvergenceError: k_max níveis sem atingir ``tol``.
        BoundaryConsistencyError: erro de contorno > 10·tol após a convergência.
    """
    if grid.kind != "global":
        raise ValueError(f"solve_exterior exige grade global com r₀ como nó (recebeu {grid.kind!r}).")
    exterior, i0 = grid.restrict(spec.r0)
    threshold = eps0_threshold if eps0_threshold is not None else get_settings().eps0_threshold
    violations = SourceValidationService.check_exterior_spec(spec, f, r_max=grid.r_max, eps0_threshold=threshold)
    if violations:
        raise ValidationFailedError("Dados exteriores inadmissíveis: " + ", ".join(v.check for v in violations),
                                    violations)
    tau = default_tau(f.beta) if tau is None else tau

    f_ext = extend_source(f, spec.r0, spec.d_target, profile=profile, r_max=grid.r_max)
    base = solve_global(f_ext, None, grid, tol, tau=tau)
    offset = normalize_boundary(base, spec)
    if offset.holder > threshold:
        raise ValidationFailedError(f"Offset de contorno com [·]_α={offset.holder:.3e} > ε₀={threshold:g}.", offset)

    hess_v = _restrict_hessian(cartesian_hessian(base.v), exterior, i0)
    coeffs = coefficients_from_hessian(hess_v, far_field_d=base.profile.d)
    psi0 = solve_psi0(coeffs, offset)
    state = ExteriorState(k=0, h=psi0, psi_k=psi0, h_prev=exterior.field(0.0), tau=tau)
    check_convexity(hess_v + cartesian_hessian(psi0), 0)
    state.history.append({"k": 0, "sup_psi": psi0.sup(), "weighted_sup": psi0.weighted_sup(tau), "ratio": None})

    converged = False
    while state.k < k_max:
        state = exterior_step(state, coeffs, hess_v)
        if state.weighted_sup < tol:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(
            f"Cascata exterior sem convergência em {k_max} níveis (último sup ponderado {state.weighted_sup:.3e}).",
            state.history,
        )

    v_ext = _restrict(base.v, exterior, i0)
    u = v_ext + offset.shift + state.h
    state.boundary_error = float(np.max(np.abs(u.values[0] - spec.boundary_data(exterior.theta))))
    if state.boundary_error > _BOUNDARY_FACTOR * tol:
        raise BoundaryConsistencyError(
            f"Erro de contorno {state.boundary_error:.3e} > {_BOUNDARY_FACTOR:g}·tol={_BOUNDARY_FACTOR * tol:.1e}.")

    fit = fit_expansion(u.interpolator(), None, fit_window, r_max=exterior.r_max)
    log.info("Solução exterior: %d níveis, d_target=%.6g d_fit=%.8g c_d=%.8g, erro de contorno %.2e",
             state.k, spec.d_target, fit.d_fit, fit.c_fit, state.boundary_error)
    return ExteriorSolution(u=exterior.field(u.values), base=base, f_ext=f_ext, offset=offset, psi0=psi0,
                            state=state, fit=fit, d_target=spec.d_target,
                            delta_a=float(psi0.meta.get("delta_a", 0.0)))


def uniqueness_check(
    spec: ExteriorSpec,
    f: SourceField,
    grid: PolarGrid,
    tol: float = 1e-10,
    profiles: tuple[BumpName, BumpName] = ("cubic", "quartic"),
    **kwargs,
) -> dict:
    """Duas extensões com o mesmo d_target: sup |u₁ − u₂| em [r₀, R_max/2]."""
    first = solve_exterior(spec, f, grid, tol, profile=profiles[0], **kwargs)
    second = solve_exterior(spec, f, grid, tol, profile=profiles[1], **kwargs)
    keep = first.grid.radii <= first.grid.r_max / 2
    diff = float(np.max(np.abs(first.u.values[keep] - second.u.values[keep])))
    report = {
        "profiles": list(profiles),
        "sup_difference": diff,
        "window": [first.grid.r_start, first.grid.r_max / 2],
        "gamma": [first.f_ext.params["gamma"], second.f_ext.params["gamma"]],
        "d_fit": [first.fit.d_fit, second.fit.d_fit],
    }
    log.info("Unicidade (%s × %s): sup|u₁ − u₂| = %.3e", profiles[0], profiles[1], diff)
    return report
