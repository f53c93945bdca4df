"""
Polar Grid v1.0
===============
Discretização polar do plano (grade global), de um anel exterior
[r₀, R_max] ou de um disco de Kelvin, com campos escalares, decomposição
em modos angulares e extração do Hessiano cartesiano a partir das derivadas
polares.

  • raio: diferenças finitas de 5 pontos (pesos de Fornberg) na grade graduada,
    com extensão por paridade através da origem: u(−r, θ) = u(r, θ + π)
  • ângulo: diferenciação espectral (FFT real)

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal

import numpy as np
from scipy.interpolate import RectBivariateSpline

log = logging.getLogger("ampere2d.grid")

GridKind = Literal["global", "exterior", "disk"]

# ────────────────────────────────────────────────────────────────
# CONSTANTES DA DISCRETIZAÇÃO
# ────────────────────────────────────────────────────────────────
_STENCIL_WIDTH = 5
_MIN_THETA = 32
_RMAX_FACTOR = 32.0
_ORIGIN_TOL = 1e-8
_THETA_PAD = 3


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """
    Pesos de diferenças finitas em nós arbitrários (algoritmo de Fornberg).

    Args:
        z: Ponto onde a derivada é aproximada.
        x: Posições dos nós do estêncil.
        m: Maior ordem de derivada desejada.

    Returns:
        Matriz (len(x), m+1); a coluna k contém os pesos da k-ésima derivada.
    """
    n = len(x) - 1
    c = np.zeros((n + 1, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n + 1):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@dataclass(frozen=True)
class RadialStencil:
    """Estêncil radial de 5 pontos por nó; ``mirror`` marca nós refletidos pela origem."""

    index: np.ndarray      # (n_r, 5) índices de nós
    mirror: np.ndarray     # (n_r, 5) bool: nó usado em −r (ângulo θ + π)
    d1: np.ndarray         # (n_r, 5) pesos da primeira derivada
    d2: np.ndarray         # (n_r, 5) pesos da segunda derivada
    one_sided: np.ndarray  # (n_r,) bool: estêncil deslocado (fronteira)

    @classmethod
    def build(cls, radii: np.ndarray, through_origin: bool) -> "RadialStencil":
        n = len(radii)
        if n < _STENCIL_WIDTH:
            raise ValueError(f"Grade radial precisa de ao menos {_STENCIL_WIDTH} nós (recebeu {n}).")
        half = _STENCIL_WIDTH // 2
        index = np.zeros((n, _STENCIL_WIDTH), dtype=int)
        mirror = np.zeros((n, _STENCIL_WIDTH), dtype=bool)
        d1 = np.zeros((n, _STENCIL_WIDTH))
        d2 = np.zeros((n, _STENCIL_WIDTH))
        one_sided = np.zeros(n, dtype=bool)
        for i in range(n):
            lo = i - half
            if lo < 0 and not through_origin:
                lo = 0
            lo = min(lo, n - _STENCIL_WIDTH)
            js = np.arange(lo, lo + _STENCIL_WIDTH)
            idx = np.abs(js)
            mir = js < 0
            pos = np.where(mir, -radii[idx], radii[idx])
            w = fornberg_weights(radii[i], pos, 2)
            index[i], mirror[i] = idx, mir
            d1[i], d2[i] = w[:, 1], w[:, 2]
            one_sided[i] = lo != i - half
        return cls(index=index, mirror=mirror, d1=d1, d2=d2, one_sided=one_sided)

    def apply(self, values: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Aplica os pesos a valores físicos (n_r × n_θ)."""
        shifted = np.roll(values, values.shape[1] // 2, axis=1)
        out = np.zeros_like(values)
        for s in range(_STENCIL_WIDTH):
            src = values[self.index[:, s]]
            if self.mirror[:, s].any():
                src = np.where(self.mirror[:, s, None], shifted[self.index[:, s]], src)
            out += weights[:, s, None] * src
        return out

    def apply_modes(self, coeffs: np.ndarray, weights: np.ndarray, modes: np.ndarray) -> np.ndarray:
        """Aplica os pesos a coeficientes modais (n_r × n_modos); a paridade vale (−1)^m."""
        parity = np.where(np.asarray(modes) % 2 == 0, 1.0, -1.0)
        out = np.zeros_like(coeffs)
        for s in range(_STENCIL_WIDTH):
            src = coeffs[self.index[:, s]]
            src = np.where(self.mirror[:, s, None], parity[None, :] * src, src)
            out += weights[:, s, None] * src
        return out


# ────────────────────────────────────────────────────────────────
# GRADE POLAR
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Grade polar graduada: raios crescentes × n_theta ângulos uniformes."""

    radii: np.ndarray
    n_theta: int
    kind: GridKind = "global"

    def __post_init__(self) -> None:
        radii = np.asarray(self.radii, dtype=float)
        object.__setattr__(self, "radii", radii)
        if self.kind not in ("global", "exterior", "disk"):
            raise ValueError(f"Tipo de grade inválido: {self.kind!r}")
        if radii.ndim != 1 or np.any(np.diff(radii) <= 0):
            raise ValueError("Raios devem ser estritamente crescentes.")
        if self.n_theta < _MIN_THETA or self.n_theta & (self.n_theta - 1):
            raise ValueError(f"n_theta deve ser potência de dois ≥ {_MIN_THETA} (recebeu {self.n_theta}).")
        if self.includes_origin and radii[0] != 0.0:
            raise ValueError(f"Grade {self.kind} deve começar em r=0.")
        if self.kind == "exterior" and radii[0] <= 0:
            raise ValueError("Grade exterior exige r₀ > 0.")
        if self.kind != "disk" and radii[-1] < _RMAX_FACTOR * max(1.0, self.r_start):
            raise ValueError(
                f"R_max={radii[-1]:g} menor que {_RMAX_FACTOR:g}·max(1, r₀)={_RMAX_FACTOR * max(1.0, self.r_start):g}."
            )

    @classmethod
    def graded(
        cls,
        n_r: int,
        r_max: float,
        n_theta: int = 64,
        kind: GridKind = "global",
        r0: float = 1.0,
    ) -> "PolarGrid":
        """
        Constrói a grade graduada padrão.

        Global: espaçamento uniforme h₀ em [0, r0] (r0 = 1 por padrão) e razão
        geométrica q ≈ 1 + h₀/r0 até R_max, de modo que o passo é contínuo no joelho.
        Exterior: geométrica pura de r0 até R_max.
        """
        if kind == "exterior":
            radii = r0 * (r_max / r0) ** (np.arange(n_r) / (n_r - 1))
            radii[-1] = r_max
            return cls(radii=radii, n_theta=n_theta, kind=kind)
        if r_max <= r0:
            raise ValueError(f"R_max={r_max:g} deve exceder o joelho r0={r0:g}.")
        candidates = np.arange(2, n_r - 2)
        n_geo = n_r - 1 - candidates
        mismatch = np.abs((r_max / r0) ** (1.0 / n_geo) - 1.0 - 1.0 / candidates)
        n_uni = int(candidates[np.argmin(mismatch)])
        n_geo = n_r - 1 - n_uni
        q = (r_max / r0) ** (1.0 / n_geo)
        radii = np.concatenate([np.linspace(0.0, r0, n_uni + 1), r0 * q ** np.arange(1, n_geo + 1)])
        radii[-1] = r_max
        log.debug("Grade graduada: %d nós uniformes, %d geométricos (q=%.5f)", n_uni + 1, n_geo, q)
        return cls(radii=radii, n_theta=n_theta, kind=kind)

    def restrict(self, r_start: float) -> tuple["PolarGrid", int]:
        """Sub-grade exterior com os nós r ≥ r_start (r_start deve ser um nó)."""
        i0 = int(np.argmin(np.abs(self.radii - r_start)))
        if abs(self.radii[i0] - r_start) > 1e-10 * max(1.0, r_start):
            raise ValueError(f"r₀={r_start:g} não é nó da grade.")
        return PolarGrid(radii=self.radii[i0:], n_theta=self.n_theta, kind="exterior"), i0

    # ── Propriedades derivadas ──────────────────────────────────
    @property
    def n_r(self) -> int:
        return len(self.radii)

    @property
    def r_start(self) -> float:
        return float(self.radii[0])

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    @cached_property
    def knee(self) -> float | None:
        """Primeiro nó em que o passo deixa de ser o passo inicial; None numa grade de passo constante."""
        steps = np.diff(self.radii)
        changed = np.abs(steps - steps[0]) > 1e-9 * steps[0]
        if not changed.any():
            return None
        return float(self.radii[int(np.argmax(changed))])

    @property
    def includes_origin(self) -> bool:
        return self.kind in ("global", "disk")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @cached_property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(self.n_theta // 2 + 1)

    @cached_property
    def stencil(self) -> RadialStencil:
        return RadialStencil.build(self.radii, through_origin=self.includes_origin)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordenadas cartesianas (x1, x2) dos nós, cada uma n_r × n_θ."""
        r = self.radii[:, None]
        return r * np.cos(self.theta)[None, :], r * np.sin(self.theta)[None, :]

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Pesos (n_r,) de ∫∫ g r dr dθ: trapézio em r vezes 2π/n_θ por ângulo."""
        r = self.radii
        w = np.zeros_like(r)
        h = np.diff(r)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w * r * (2.0 * np.pi / self.n_theta)

    def interior_mask(self) -> np.ndarray:
        """Nós onde a equação é imposta (exclui linhas de contorno)."""
        mask = np.ones(self.n_r, dtype=bool)
        mask[-1] = False
        if not self.includes_origin:
            mask[0] = False
        return mask

    def field(self, values: np.ndarray | float, **meta) -> "PolarField":
        values = np.broadcast_to(np.asarray(values, dtype=float), self.shape).copy()
        return PolarField(values=values, grid=self, meta=dict(meta))

    def sample(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "PolarField":
        """Avalia func(x1, x2) nos nós."""
        x1, x2 = self.mesh
        return self.field(func(x1, x2))


# ────────────────────────────────────────────────────────────────
# CAMPOS
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class PolarField:
    values: np.ndarray
    grid: PolarGrid
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise ValueError(f"Forma {self.values.shape} incompatível com a grade {self.grid.shape}.")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Campo polar com valores não finitos.")
        if self.grid.includes_origin:
            row = self.values[0]
            spread = float(np.max(row) - np.min(row))
            if spread > _ORIGIN_TOL * (1.0 + float(np.max(np.abs(row)))):
                raise ValueError(f"Campo multivalorado na origem (variação {spread:.3e}).")

    # ── Aritmética ──────────────────────────────────────────────
    def _wrap(self, values: np.ndarray) -> "PolarField":
        return PolarField(values=values, grid=self.grid)

    def _other(self, other) -> np.ndarray | float:
        if isinstance(other, PolarField):
            if other.grid is not self.grid and other.grid.shape != self.grid.shape:
                raise ValueError("Campos em grades diferentes.")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    # ── Normas ─────────────────────────────────────────────────
    def sup(self, mask: np.ndarray | None = None) -> float:
        vals = self.values if mask is None else self.values[mask]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def weighted_sup(self, tau: float) -> float:
        return float(np.max((1.0 + self.grid.radii[:, None]) ** tau * np.abs(self.values)))

    def integrate(self) -> float:
        return float(np.sum(self.grid.quadrature_weights[:, None] * self.values))

    def inner(self, other: "PolarField") -> float:
        return float(np.sum(self.grid.quadrature_weights[:, None] * self.values * other.values))

    def interpolator(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """Interpolação bicúbica (r, θ periódico); NaN fora de [r_start, R_max]."""
        grid = self.grid
        theta = grid.theta
        theta_ext = np.concatenate([theta[-_THETA_PAD:] - 2.0 * np.pi, theta, theta[:_THETA_PAD] + 2.0 * np.pi])
        vals_ext = np.concatenate([self.values[:, -_THETA_PAD:], self.values, self.values[:, :_THETA_PAD]], axis=1)
        spline = RectBivariateSpline(grid.radii, theta_ext, vals_ext, kx=3, ky=3)
        r_lo, r_hi = grid.r_start, grid.r_max

        def evaluate(x1, x2):
            x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
            r = np.hypot(x1, x2)
            th = np.mod(np.arctan2(x2, x1), 2.0 * np.pi)
            out = spline.ev(r.ravel(), th.ravel()).reshape(r.shape)
            inside = (r >= r_lo - 1e-12) & (r <= r_hi + 1e-12)
            return np.where(inside, out, np.nan)

        return evaluate


@dataclass(frozen=True, eq=False)
class HessianField:
    """Hessiano cartesiano (u12 armazenado uma vez) e, opcionalmente, o gradiente."""

    u11: PolarField
    u12: PolarField
    u22: PolarField
    u1: PolarField | None = None
    u2: PolarField | None = None

    def __add__(self, other: "HessianField") -> "HessianField":
        grad = (None, None)
        if self.u1 is not None and other.u1 is not None:
            grad = (self.u1 + other.u1, self.u2 + other.u2)
        return HessianField(self.u11 + other.u11, self.u12 + other.u12, self.u22 + other.u22, *grad)

    def min_eigenvalue(self) -> np.ndarray:
        a, b, c = self.u11.values, self.u12.values, self.u22.values
        return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b**2)

    def max_eigenvalue(self) -> np.ndarray:
        a, b, c = self.u11.values, self.u12.values, self.u22.values
        return 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b**2)


# ────────────────────────────────────────────────────────────────
# OPERAÇÕES
# ────────────────────────────────────────────────────────────────

def mode_decompose(field: PolarField) -> np.ndarray:
    """Coeficientes de Fourier em θ por raio: n_r × (n_θ/2 + 1), normalizados por n_θ."""
    return np.fft.rfft(field.values, axis=1) / field.grid.n_theta


def mode_recompose(coeffs: np.ndarray, grid: PolarGrid) -> PolarField:
    return grid.field(np.fft.irfft(coeffs * grid.n_theta, n=grid.n_theta, axis=1))


def theta_derivatives(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """u_θ e u_θθ espectrais; o modo de Nyquist é zerado na primeira derivada."""
    n = values.shape[1]
    k = np.arange(n // 2 + 1)
    c = np.fft.rfft(values, axis=1)
    ik = 1j * k.astype(float)
    ik[-1] = 0.0
    d1 = np.fft.irfft(c * ik[None, :], n=n, axis=1)
    d2 = np.fft.irfft(c * (-(k.astype(float) ** 2))[None, :], n=n, axis=1)
    return d1, d2


def radial_derivatives(values: np.ndarray, grid: PolarGrid) -> tuple[np.ndarray, np.ndarray]:
    st = grid.stencil
    return st.apply(values, st.d1), st.apply(values, st.d2)


def _origin_mode(row: np.ndarray, theta: np.ndarray, k: int) -> tuple[float, float]:
    """Coeficientes (cos kθ, sin kθ) de uma linha angular."""
    return 2.0 * float(np.mean(row * np.cos(k * theta))), 2.0 * float(np.mean(row * np.sin(k * theta)))


def _meta(grid: PolarGrid) -> dict:
    return {"one_sided": bool(grid.stencil.one_sided.any())} if grid.kind == "exterior" else {}


def cartesian_gradient(field: PolarField) -> tuple[PolarField, PolarField]:
    grid = field.grid
    ur = grid.stencil.apply(field.values, grid.stencil.d1)
    ut, _ = theta_derivatives(field.values)
    c, s = np.cos(grid.theta)[None, :], np.sin(grid.theta)[None, :]
    r = grid.radii[:, None].copy()
    if grid.includes_origin:
        r[0] = 1.0
    u1 = c * ur - s * ut / r
    u2 = s * ur + c * ut / r
    if grid.includes_origin:
        g1, g2 = _origin_mode(ur[0], grid.theta, 1)
        u1[0], u2[0] = g1, g2
    meta = _meta(grid)
    return PolarField(u1, grid, dict(meta)), PolarField(u2, grid, dict(meta))


def cartesian_hessian(field: PolarField) -> HessianField:
    """
    Hessiano cartesiano a partir das derivadas polares.

    Em r > 0:
        H_rr = u_rr,  H_rt = u_rθ/r − u_θ/r²,  H_tt = u_r/r + u_θθ/r²
        u11 = c²H_rr − 2sc·H_rt + s²H_tt
        u22 = s²H_rr + 2sc·H_rt + c²H_tt
        u12 = sc(H_rr − H_tt) + (c² − s²)H_rt
    Na origem o Hessiano é lido da dependência em θ de u_rr(0, θ).
    """
    grid = field.grid
    st = grid.stencil
    v = field.values
    ur, urr = st.apply(v, st.d1), st.apply(v, st.d2)
    ut, utt = theta_derivatives(v)
    urt = st.apply(ut, st.d1)
    c, s = np.cos(grid.theta)[None, :], np.sin(grid.theta)[None, :]
    r = grid.radii[:, None].copy()
    if grid.includes_origin:
        r[0] = 1.0
    h_rr = urr
    h_rt = urt / r - ut / r**2
    h_tt = ur / r + utt / r**2
    u11 = c**2 * h_rr - 2 * s * c * h_rt + s**2 * h_tt
    u22 = s**2 * h_rr + 2 * s * c * h_rt + c**2 * h_tt
    u12 = s * c * (h_rr - h_tt) + (c**2 - s**2) * h_rt
    u1 = c * ur - s * ut / r
    u2 = s * ur + c * ut / r
    if grid.includes_origin:
        a0 = float(np.mean(urr[0]))
        a2, b2 = _origin_mode(urr[0], grid.theta, 2)
        u11[0], u22[0], u12[0] = a0 + a2, a0 - a2, b2
        u1[0], u2[0] = _origin_mode(ur[0], grid.theta, 1)
    meta = _meta(grid)
    wrap = lambda arr: PolarField(arr, grid, dict(meta))  # noqa: E731
    return HessianField(wrap(u11), wrap(u12), wrap(u22), wrap(u1), wrap(u2))


def det_hessian(h: HessianField) -> PolarField:
    return h.u11 * h.u22 - h.u12 * h.u12


def divergence_flux(h: HessianField) -> tuple[PolarField, PolarField]:
    """Par de fluxos (∂₁φ·∂₂₂φ, −∂₁₂φ·∂₁φ) com det D²φ = ∂₁F₁ + ∂₂F₂."""
    if h.u1 is None:
        raise ValueError("HessianField sem gradiente; use cartesian_hessian.")
    return h.u1 * h.u22, -(h.u12 * h.u1)


def flux_divergence(flux: tuple[PolarField, PolarField]) -> PolarField:
    d1, _ = cartesian_gradient(flux[0])
    _, d2 = cartesian_gradient(flux[1])
    return d1 + d2
