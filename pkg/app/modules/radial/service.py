"""
Radial Core Service v1.0
========================
Constrói a solução radial base U de det(D²U) = f̃₁ por quadratura:

    U′(r)² = ∫₀^r 2t f̃₁(t) dt,   U″ = r f̃₁ / U′,   U(0) = 0

as constantes da expansão (massa d e constante c_d), as componentes
F₁ = (U″ + U′/r)/2 e F₂ = (U″ − U′/r)/2 e os coeficientes do operador
linearizado a* = cof(D²U):

    a*₁₁ = F₁ − F₂ cos2θ,   a*₂₂ = F₁ + F₂ cos2θ,   a*₁₂ = −F₂ sin2θ

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import RectBivariateSpline

from app.errors import CoefficientDegeneracyError, DegenerateSourceError
from app.modules.grid.polar import HessianField, PolarField, PolarGrid, cartesian_gradient, cartesian_hessian
from app.modules.ingest.service import RadialTable

log = logging.getLogger("ampere2d.radial")

# ────────────────────────────────────────────────────────────────
# CONSTANTES DE QUADRATURA
# ────────────────────────────────────────────────────────────────
_GAUSS_START = 8
_GAUSS_MAX = 64
_REL_TOL = 1e-10
_CD_UNIFORM_EDGES = 65
_CD_GEOMETRIC_EDGES = 400


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Perfil radial tabelado nos nós r."""
    r: np.ndarray
    ftilde: np.ndarray
    U: np.ndarray
    Uprime: np.ndarray
    Usecond: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    d: float
    c_d: float
    tail_error: float = 0.0
    gauss_points: int = _GAUSS_START

    @property
    def p(self) -> np.ndarray:
        """U′/r (autovalor tangencial de D²U; coeficiente de ψ″ no operador)."""
        return self.F1 - self.F2

    @property
    def q(self) -> np.ndarray:
        """U″ (autovalor radial de D²U)."""
        return self.F1 + self.F2

    def on(self, grid: PolarGrid) -> slice:
        """Fatia do perfil que coincide com os raios da grade (global ou restrição exterior)."""
        n = grid.n_r
        if len(self.r) >= n and np.allclose(self.r[-n:], grid.radii, rtol=1e-12, atol=1e-14):
            return slice(len(self.r) - n, len(self.r))
        raise ValueError("Raios do perfil radial não coincidem com a grade.")

    def field(self, grid: PolarGrid) -> PolarField:
        """U como campo polar."""
        return grid.field(self.U[self.on(grid)][:, None])


# ────────────────────────────────────────────────────────────────
# QUADRATURAS ANINHADAS
# ────────────────────────────────────────────────────────────────

def _nested_quadrature(
    table: RadialTable,
    edges: np.ndarray,
    n_gauss: int,
    outer: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre composto em dois níveis.

    M(s) = ∫₀^s t(f̃₁(t) − 1) dt é acumulado nos nós e reconstruído em cada ponto
    de Gauss externo por uma quadratura interna em [e_i, s]; devolve
    (M nos nós, ∫₀^{e_i} outer(s, M(s)) ds nos nós).
    """
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    s = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
    dm = half * np.sum(w * s * (table(s) - 1.0), axis=1)
    m_nodes = np.concatenate([[0.0], np.cumsum(dm)])
    hq = 0.5 * (s - a[:, None])
    t = a[:, None, None] + hq[..., None] * (x[None, None, :] + 1.0)
    m_s = m_nodes[:-1, None] + hq * np.sum(w * t * (table(t) - 1.0), axis=2)
    seg = half * np.sum(w * outer(s, m_s), axis=1)
    return m_nodes, np.concatenate([[0.0], np.cumsum(seg)])


def _adaptive(table: RadialTable, edges: np.ndarray, outer) -> tuple[np.ndarray, np.ndarray, int]:
    """Dobra o número de pontos de Gauss até variação relativa < 1e−10."""
    n = _GAUSS_START
    m_prev, acc_prev = _nested_quadrature(table, edges, n, outer)
    while n < _GAUSS_MAX:
        n *= 2
        m_new, acc_new = _nested_quadrature(table, edges, n, outer)
        scale = max(float(np.max(np.abs(acc_new))), 1e-300)
        change = float(np.max(np.abs(acc_new - acc_prev))) / scale
        m_prev, acc_prev = m_new, acc_new
        if change < _REL_TOL:
            return m_prev, acc_prev, n
    log.warning("Quadratura radial não atingiu variação relativa %.0e com %d pontos.", _REL_TOL, n)
    return m_prev, acc_prev, n


def mass_tail_bound(c0: float, beta: float, r_max: float) -> float:
    """Cota da cauda ∫_{R}^∞ r|f̃₁ − 1| dr ≤ c₀ R^(2−β)/(β−2)."""
    if beta <= 2:
        return math.inf
    return c0 * r_max ** (2.0 - beta) / (beta - 2.0)


# ────────────────────────────────────────────────────────────────
# OPERAÇÕES
# ────────────────────────────────────────────────────────────────

def compute_d(ftilde: RadialTable, r_max: float | None = None) -> float:
    """d = ∫₀^R r(f̃₁ − 1) dr (quad adaptativa com quebras geométricas)."""
    r_max = float(ftilde.r[-1]) if r_max is None else float(r_max)

    def integrand(r):
        return r * (float(ftilde(np.array([r]))[0]) - 1.0)

    breaks = [0.5, 1.0] + list(np.geomspace(2.0, r_max / 2, 8)) if r_max > 4 else None
    value, err = quad(integrand, 0.0, r_max, points=breaks, limit=400, epsabs=1e-14, epsrel=1e-12)
    log.debug("compute_d: d=%.12g (erro de quadratura %.1e)", value, err)
    return float(value)


def compute_cd(ftilde: RadialTable, d: float, r_max: float | None = None) -> float:
    """
    c_d = lim (U(r) − r²/2 − d log r).

    Para d > 0 usa o núcleo d/√(s²+d) com as constantes d·log 2 − (d/2)·log d;
    para d < 0 o núcleo d/√(s²+d) não está definido perto de s = 0 e é trocado
    pelo núcleo equivalente d·s/(1+s²), sem constante aditiva.
    """
    r_max = float(ftilde.r[-1]) if r_max is None else float(r_max)
    if d > 0:
        def kernel(s):
            return d / np.sqrt(s * s + d)
        constant = d * math.log(2.0) - 0.5 * d * math.log(d)
    elif d < 0:
        log.warning("compute_cd: s² + d ≤ 0 para s ≤ %.4g (d=%.4g); usando núcleo regularizado.", math.sqrt(-d), d)

        def kernel(s):
            return d * s / (1.0 + s * s)
        constant = 0.0
    else:
        def kernel(s):
            return np.zeros_like(s)
        constant = 0.0

    def outer(s, m):
        return 2.0 * m / (np.sqrt(s * s + 2.0 * m) + s) - kernel(s)

    edges = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, _CD_UNIFORM_EDGES),
        np.geomspace(1.0, r_max, _CD_GEOMETRIC_EDGES),
    ])) if r_max > 1 else np.linspace(0.0, r_max, _CD_UNIFORM_EDGES)
    _, acc, _ = _adaptive(ftilde, edges, outer)
    return float(acc[-1] + constant)


def build_radial_solution(
    ftilde: RadialTable,
    *,
    c0: float | None = None,
    beta: float | None = None,
) -> RadialProfile:
    """
    Tabela U, U′, U″, F₁, F₂, d e c_d nos raios de ``ftilde``.

    Raises:
        DegenerateSourceError: f̃₁ ≤ 0 em algum nó.
    """
    r = ftilde.r
    if np.any(ftilde.values <= 0):
        i = int(np.argmin(ftilde.values))
        raise DegenerateSourceError(f"f̃₁ ≤ 0 em r={r[i]:.6g} (valor {ftilde.values[i]:.3e}).")

    def outer(s, m):
        return np.sqrt(np.maximum(s * s + 2.0 * m, 0.0))

    m_nodes, U, n_gauss = _adaptive(ftilde, r, outer)
    inner = r * r + 2.0 * m_nodes
    if np.any(inner[1:] <= 0):
        raise DegenerateSourceError("∫₀^r 2t f̃₁ dt ≤ 0: fonte degenerada.")
    Uprime = np.sqrt(np.maximum(inner, 0.0))
    Usecond = np.empty_like(r)
    Usecond[1:] = r[1:] * ftilde.values[1:] / Uprime[1:]
    Usecond[0] = math.sqrt(ftilde.values[0])
    ratio = np.empty_like(r)
    ratio[1:] = Uprime[1:] / r[1:]
    ratio[0] = Usecond[0]
    F1 = 0.5 * (Usecond + ratio)
    F2 = 0.5 * (Usecond - ratio)
    F2[0] = 0.0

    d = compute_d(ftilde)
    c_d = compute_cd(ftilde, d)
    source = ftilde.source
    c0 = source.c0 if c0 is None else c0
    beta = source.beta if beta is None else beta
    tail = mass_tail_bound(c0, beta, float(r[-1]))
    log.info("Perfil radial: %d nós, d=%.8g, c_d=%.8g (cauda ≤ %.1e, %d pts de Gauss)", len(r), d, c_d, tail, n_gauss)
    return RadialProfile(r=r.copy(), ftilde=ftilde.values.copy(), U=U, Uprime=Uprime, Usecond=Usecond,
                         F1=F1, F2=F2, d=d, c_d=c_d, tail_error=tail, gauss_points=n_gauss)


# ────────────────────────────────────────────────────────────────
# COEFICIENTES DO OPERADOR LINEARIZADO
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class CoefficientField:
    """
    Coeficientes a_ij (e deriva opcional b_k) de L ψ = a_ij ∂ᵢⱼψ + b_k ∂ₖψ.

    ``radial`` guarda (p, q, s) quando o operador é separável:
    L = p ∂_rr + q(∂_r/r + ∂_θθ/r²) + s ∂_r.
    """
    a11: PolarField
    a12: PolarField
    a22: PolarField
    lambda_min: float
    lambda_max: float
    b1: PolarField | None = None
    b2: PolarField | None = None
    radial: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    far_field_d: float = 0.0

    @property
    def grid(self) -> PolarGrid:
        return self.a11.grid

    @property
    def c1(self) -> float:
        return 1.0 / self.lambda_min

    @classmethod
    def from_components(
        cls,
        a11: PolarField,
        a12: PolarField,
        a22: PolarField,
        *,
        b1: PolarField | None = None,
        b2: PolarField | None = None,
        radial: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
        far_field_d: float = 0.0,
    ) -> "CoefficientField":
        h = HessianField(a11, a12, a22)
        lam_min = float(np.min(h.min_eigenvalue()))
        lam_max = float(np.max(h.max_eigenvalue()))
        if lam_min <= 0:
            raise CoefficientDegeneracyError(f"Coeficientes não elípticos: λ_min = {lam_min:.3e}.")
        return cls(a11=a11, a12=a12, a22=a22, lambda_min=lam_min, lambda_max=lam_max,
                   b1=b1, b2=b2, radial=radial, far_field_d=far_field_d)

    @classmethod
    def identity(cls, grid: PolarGrid) -> "CoefficientField":
        ones, zeros = np.ones(grid.n_r), np.zeros(grid.n_r)
        return cls.from_components(grid.field(1.0), grid.field(0.0), grid.field(1.0), radial=(ones, ones, zeros))

    def determinant(self) -> PolarField:
        return self.a11 * self.a22 - self.a12 * self.a12

    def closeness_constant(self) -> float:
        """sup (1+r)² |a_ij − δ_ij| na grade."""
        dev = np.maximum.reduce([np.abs(self.a11.values - 1), np.abs(self.a12.values), np.abs(self.a22.values - 1)])
        return float(np.max((1.0 + self.grid.radii[:, None]) ** 2 * dev))

    def deviation_radius(self, threshold: float) -> float:
        """Menor R tal que |a − δ| < threshold para todo r ≥ R (heurística de R₀)."""
        dev = np.maximum.reduce([np.abs(self.a11.values - 1), np.abs(self.a12.values), np.abs(self.a22.values - 1)])
        bad = np.nonzero(dev.max(axis=1) >= threshold)[0]
        return 0.0 if len(bad) == 0 else float(self.grid.radii[min(bad[-1] + 1, self.grid.n_r - 1)])

    def polar_components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(a_rr, a_θθ, a_rθ, b_r) nos nós."""
        th = self.grid.theta[None, :]
        c, s = np.cos(th), np.sin(th)
        a11, a12, a22 = self.a11.values, self.a12.values, self.a22.values
        a_rr = a11 * c * c + 2 * a12 * s * c + a22 * s * s
        a_tt = a11 * s * s - 2 * a12 * s * c + a22 * c * c
        a_rt = (a22 - a11) * s * c + a12 * (c * c - s * s)
        if self.b1 is None:
            b_r = np.zeros_like(a11)
        else:
            b_r = self.b1.values * c + self.b2.values * s
        return a_rr, a_tt, a_rt, b_r

    def radial_part(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(p̄, q̄, s̄): médias angulares que definem o operador separável mais próximo."""
        if self.radial is not None:
            return self.radial
        a_rr, a_tt, _, b_r = self.polar_components()
        p, q, s = a_rr.mean(axis=1), a_tt.mean(axis=1), b_r.mean(axis=1)
        if self.grid.includes_origin:
            iso = 0.5 * (p[0] + q[0])
            p[0] = q[0] = iso
            s[0] = 0.0
        return p, q, s

    def apply(self, field: PolarField, hessian: HessianField | None = None) -> PolarField:
        """L ψ = a_ij ∂ᵢⱼψ + b_k ∂ₖψ via Hessiano cartesiano."""
        h = hessian or cartesian_hessian(field)
        out = self.a11 * h.u11 + 2.0 * (self.a12 * h.u12) + self.a22 * h.u22
        if self.b1 is not None:
            g1, g2 = (h.u1, h.u2) if h.u1 is not None else cartesian_gradient(field)
            out = out + self.b1 * g1 + self.b2 * g2
        return out

    def evaluator(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """
        a(x) como matriz (..., 2, 2): interpolação bicúbica dentro da grade e,
        além de R_max, a forma assintótica radial p = 1 + d/r², q = 1 − d/r².
        """
        grid = self.grid
        theta_ext = np.concatenate([grid.theta[-3:] - 2 * np.pi, grid.theta, grid.theta[:3] + 2 * np.pi])

        def spline(values):
            ext = np.concatenate([values[:, -3:], values, values[:, :3]], axis=1)
            return RectBivariateSpline(grid.radii, theta_ext, ext, kx=3, ky=3)

        splines = [spline(self.a11.values), spline(self.a12.values), spline(self.a22.values)]
        d = self.far_field_d
        r_max, r_lo = grid.r_max, grid.r_start

        def evaluate(x1, x2):
            x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
            r = np.hypot(x1, x2)
            th = np.mod(np.arctan2(x2, x1), 2 * np.pi)
            rr = np.clip(r, r_lo, r_max)
            comps = [sp.ev(rr.ravel(), th.ravel()).reshape(r.shape) for sp in splines]
            far = r > r_max
            safe = np.where(far, r, 1.0)
            p = 1.0 + d / safe**2
            q = 1.0 - d / safe**2
            c, s = np.cos(th), np.sin(th)
            far11 = p * c * c + q * s * s
            far22 = p * s * s + q * c * c
            far12 = (p - q) * s * c
            a11 = np.where(far, far11, comps[0])
            a12 = np.where(far, far12, comps[1])
            a22 = np.where(far, far22, comps[2])
            out = np.empty(r.shape + (2, 2))
            out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = a11, a12, a12, a22
            return out

        return evaluate


def build_coefficients(profile: RadialProfile, grid: PolarGrid) -> CoefficientField:
    """
    a* = cof(D²U) para U radial, com certificado de elipticidade.

    Raises:
        CoefficientDegeneracyError: λ_min ≤ 0.
    """
    sl = profile.on(grid)
    F1, F2 = profile.F1[sl][:, None], profile.F2[sl][:, None]
    th = grid.theta[None, :]
    a11 = grid.field(F1 - F2 * np.cos(2 * th))
    a22 = grid.field(F1 + F2 * np.cos(2 * th))
    a12 = grid.field(-F2 * np.sin(2 * th))
    p, q = profile.p[sl].copy(), profile.q[sl].copy()
    coeffs = CoefficientField.from_components(a11, a12, a22, radial=(p, q, np.zeros_like(p)), far_field_d=profile.d)
    log.info("Coeficientes a*: λ_min=%.4g λ_max=%.4g (c₁=%.4g)", coeffs.lambda_min, coeffs.lambda_max, coeffs.c1)
    return coeffs


def coefficients_from_hessian(h: HessianField, *, far_field_d: float = 0.0) -> CoefficientField:
    """a* = cof(D²U) para U geral: a₁₁ = ∂₂₂U, a₂₂ = ∂₁₁U, a₁₂ = −∂₁₂U."""
    return CoefficientField.from_components(h.u22, -h.u12, h.u11, far_field_d=far_field_d)
