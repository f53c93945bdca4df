"""
Source Catalogue v1.0
=====================
Tipos de entrada do problema de Monge-Ampère det(D²u) = f:

  1. SourceField: avaliador de f com metadados de decaimento (c₀, β)
  2. AffineData: dados afins (A, b, c) com A simétrica, positiva, det A = 1
  3. BoundaryData: dado de Dirichlet φ(θ) em ∂B_{r₀}
  4. ExteriorSpec: problema exterior (r₀, φ, α, d)

Famílias embutidas (nomeadas no arquivo de problema):
  constant, rational, gaussian, anisotropic, angular, odd, e fontes tabeladas (CSV x1,x2,f).

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy.interpolate import LinearNDInterpolator

log = logging.getLogger("ampere2d.ingest")

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]
Gradient = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

# ────────────────────────────────────────────────────────────────
# CONSTANTES
# ────────────────────────────────────────────────────────────────
_FD_STEP = 1e-4
_AFFINE_TOL = 1e-12
_C0_SCAN_RADII = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 400)])
_C0_SCAN_ANGLES = 64
_C0_MARGIN = 1.01


@dataclass(frozen=True, eq=False)
class SourceField:
    """Fonte f: ℝ² → ℝ com constante bilateral c₀ e expoente de decaimento β."""

    eval: Evaluator
    c0: float
    beta: float
    k_smooth: int = 3
    grad_eval: Gradient | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.c0 > 0:
            raise ValueError(f"c0 deve ser positivo (recebeu {self.c0}).")
        if self.k_smooth < 3:
            raise ValueError(f"k_smooth deve ser ≥ 3 (recebeu {self.k_smooth}).")

    def __call__(self, x1, x2) -> np.ndarray:
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return np.broadcast_to(np.asarray(self.eval(x1, x2), dtype=float), x1.shape)

    def gradient(self, x1, x2) -> tuple[np.ndarray, np.ndarray]:
        """Gradiente analítico quando disponível; senão diferenças centrais com h = 1e−4·(1+|x|)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        if self.grad_eval is not None:
            g1, g2 = self.grad_eval(x1, x2)
            return np.broadcast_to(g1, x1.shape), np.broadcast_to(g2, x1.shape)
        h = _FD_STEP * (1.0 + np.hypot(x1, x2))
        g1 = (self(x1 + h, x2) - self(x1 - h, x2)) / (2 * h)
        g2 = (self(x1, x2 + h) - self(x1, x2 - h)) / (2 * h)
        return g1, g2


@dataclass(frozen=True, eq=False)
class AffineData:
    """Dados afins (A, b, c); sqrtA é a raiz simétrica de A."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0
    sqrtA: np.ndarray = field(init=False)
    sqrtA_inv: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float).reshape(2, 2)
        b = np.asarray(self.b, dtype=float).reshape(2)
        if np.max(np.abs(A - A.T)) > _AFFINE_TOL:
            raise ValueError("A deve ser simétrica.")
        eigval, eigvec = np.linalg.eigh(A)
        if np.any(eigval <= 0):
            raise ValueError(f"A deve ser positiva definida (autovalores {eigval}).")
        if abs(np.linalg.det(A) - 1.0) > _AFFINE_TOL:
            raise ValueError(f"det(A) deve ser 1 (recebeu {np.linalg.det(A):.15g}).")
        root = np.sqrt(eigval)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "sqrtA", (eigvec * root) @ eigvec.T)
        object.__setattr__(self, "sqrtA_inv", (eigvec / root) @ eigvec.T)

    @classmethod
    def identity(cls) -> "AffineData":
        return cls(A=np.eye(2), b=np.zeros(2), c=0.0)

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.A, np.eye(2)))

    def quadratic_norm(self, x1, x2) -> np.ndarray:
        """√(x′Ax)."""
        a = self.A
        return np.sqrt(a[0, 0] * x1 * x1 + 2 * a[0, 1] * x1 * x2 + a[1, 1] * x2 * x2)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Dado de Dirichlet φ(θ) no círculo ∂B_{r₀}."""

    eval: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.broadcast_to(np.asarray(self.eval(theta), dtype=float), theta.shape)

    @classmethod
    def harmonic(cls, offset: float = 0.0, terms: list[tuple[float, int, float]] | None = None) -> "BoundaryData":
        """φ(θ) = offset + Σ a·cos(kθ + fase)."""
        terms = [tuple(t) for t in (terms or [])]

        def phi(theta):
            out = np.full_like(theta, offset, dtype=float)
            for amp, k, phase in terms:
                out = out + amp * np.cos(k * theta + phase)
            return out

        return cls(eval=phi, name="harmonic")

    @classmethod
    def radial(cls, r0: float, offset: float = 0.0) -> "BoundaryData":
        """φ ≡ ½r₀² + offset (traço de ½|x|² deslocado)."""
        value = 0.5 * float(r0) ** 2 + float(offset)
        return cls(eval=lambda theta: np.full_like(theta, value, dtype=float), name="radial")

    @classmethod
    def from_csv(cls, path: str | Path) -> "BoundaryData":
        """CSV com colunas theta, value em theta uniforme; interpolação periódica."""
        df = pd.read_csv(path)
        missing = {"theta", "value"} - set(df.columns)
        if missing:
            raise ValueError(f"CSV de contorno sem colunas {sorted(missing)}: {path}")
        theta = df["theta"].to_numpy(dtype=float)
        value = df["value"].to_numpy(dtype=float)
        steps = np.diff(theta)
        if len(theta) < 4 or np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, steps.mean()):
            raise ValueError(f"CSV de contorno deve ter theta uniforme e crescente: {path}")

        def phi(th):
            return np.interp(np.mod(th, 2 * np.pi), theta, value, period=2 * np.pi)

        log.info("Dado de contorno tabelado carregado: %s (%d amostras)", path, len(theta))
        return cls(eval=phi, name=f"csv:{Path(path).name}")


@dataclass(frozen=True, eq=False)
class ExteriorSpec:
    """Problema exterior em ℝ² ∖ B_{r₀}: u = φ em ∂B_{r₀}, coeficiente logarítmico d_target."""

    r0: float
    boundary_data: BoundaryData
    d_target: float
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise ValueError(f"r0 deve ser positivo (recebeu {self.r0}).")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha deve estar em (0, 1) (recebeu {self.alpha}).")


# ────────────────────────────────────────────────────────────────
# FAMÍLIAS EMBUTIDAS
# ────────────────────────────────────────────────────────────────

def _fit_c0(func: Evaluator, beta: float) -> float:
    """Menor constante bilateral compatível com o decaimento declarado numa varredura densa, com margem de 1%."""
    r = _C0_SCAN_RADII[:, None]
    th = 2 * np.pi * np.arange(_C0_SCAN_ANGLES) / _C0_SCAN_ANGLES
    vals = np.asarray(func(r * np.cos(th), r * np.sin(th)), dtype=float)
    decay = np.max(np.abs(vals - 1.0) * (1.0 + r) ** beta)
    return float(_C0_MARGIN * max(np.max(vals), 1.0 / np.min(vals), decay, 1.0))


def constant(value: float = 1.0, beta: float = 4.0) -> SourceField:
    def f(x1, x2):
        return np.full(np.shape(x1), float(value))

    def grad(x1, x2):
        return np.zeros(np.shape(x1)), np.zeros(np.shape(x1))

    return SourceField(eval=f, grad_eval=grad, c0=max(value, 1.0 / value), beta=beta, name="constant", params={"value": value})


def rational(epsilon: float = 0.1, beta: float = 4.0) -> SourceField:
    """f = 1 + ε(1+|x|²)^(−β/2)."""

    def f(x1, x2):
        return 1.0 + epsilon * (1.0 + x1 * x1 + x2 * x2) ** (-beta / 2)

    def grad(x1, x2):
        w = -epsilon * beta * (1.0 + x1 * x1 + x2 * x2) ** (-beta / 2 - 1)
        return w * x1, w * x2

    return SourceField(eval=f, grad_eval=grad, c0=_fit_c0(f, beta), beta=beta, name="rational",
                       params={"epsilon": epsilon, "beta": beta})


def gaussian(epsilon: float = 0.1, beta: float = 4.0) -> SourceField:
    """f = 1 + ε·exp(−|x|²); β é apenas o expoente declarado (o decaimento real é mais rápido)."""

    def f(x1, x2):
        return 1.0 + epsilon * np.exp(-(x1 * x1 + x2 * x2))

    def grad(x1, x2):
        w = -2.0 * epsilon * np.exp(-(x1 * x1 + x2 * x2))
        return w * x1, w * x2

    return SourceField(eval=f, grad_eval=grad, c0=_fit_c0(f, beta), beta=beta, name="gaussian",
                       params={"epsilon": epsilon, "beta": beta})


def anisotropic(epsilon: float = 0.1, beta: float = 4.0, stretch: float = 2.0) -> SourceField:
    """f = 1 + ε(1 + x′Bx)^(−β/2) com B = diag(λ, 1/λ)."""
    lam = float(stretch)

    def f(x1, x2):
        return 1.0 + epsilon * (1.0 + lam * x1 * x1 + x2 * x2 / lam) ** (-beta / 2)

    def grad(x1, x2):
        w = -epsilon * beta * (1.0 + lam * x1 * x1 + x2 * x2 / lam) ** (-beta / 2 - 1)
        return w * lam * x1, w * x2 / lam

    return SourceField(eval=f, grad_eval=grad, c0=_fit_c0(f, beta), beta=beta, name="anisotropic",
                       params={"epsilon": epsilon, "beta": beta, "stretch": stretch})


def angular(epsilon: float = 0.1, delta: float = 0.05, k: int = 2, beta: float = 4.0) -> SourceField:
    """
    f = 1 + ε(1+r²)^(−β/2) + δ·Re(z^k)·(1+r²)^(−(β+k)/2).

    O termo angular vale δ·(r/√(1+r²))^k·cos(kθ)·(1+r²)^(−β/2): suave na origem
    e com o mesmo decaimento r^(−β).
    """
    k = int(k)

    def _zk(x1, x2, power):
        z = (x1 + 1j * x2) ** power
        return z.real, z.imag

    def f(x1, x2):
        s = 1.0 + x1 * x1 + x2 * x2
        re_k, _ = _zk(x1, x2, k)
        return 1.0 + epsilon * s ** (-beta / 2) + delta * re_k * s ** (-(beta + k) / 2)

    def grad(x1, x2):
        s = 1.0 + x1 * x1 + x2 * x2
        re_k, _ = _zk(x1, x2, k)
        re_k1, im_k1 = _zk(x1, x2, k - 1) if k >= 1 else (np.zeros_like(x1), np.zeros_like(x1))
        g_rad = -epsilon * beta * s ** (-beta / 2 - 1)
        big_g = s ** (-(beta + k) / 2)
        d_big_g = -(beta + k) * s ** (-(beta + k) / 2 - 1)
        g1 = g_rad * x1 + delta * (big_g * k * re_k1 + re_k * d_big_g * x1)
        g2 = g_rad * x2 + delta * (-big_g * k * im_k1 + re_k * d_big_g * x2)
        return g1, g2

    return SourceField(eval=f, grad_eval=grad, c0=_fit_c0(f, beta), beta=beta, name="angular",
                       params={"epsilon": epsilon, "delta": delta, "k": k, "beta": beta})


def odd(epsilon: float = 0.1) -> SourceField:
    """f = 1 + ε·x₁·(1+|x|²)^(−3); média esférica ≡ 1."""
    src = angular(epsilon=0.0, delta=epsilon, k=1, beta=5.0)
    return SourceField(eval=src.eval, grad_eval=src.grad_eval, c0=src.c0, beta=src.beta, name="odd",
                       params={"epsilon": epsilon})


def tabulated(path: str | Path, c0: float, beta: float) -> SourceField:
    """Fonte tabelada (CSV x1,x2,f), interpolação linear; vale 1 fora do fecho convexo."""
    df = pd.read_csv(path)
    missing = {"x1", "x2", "f"} - set(df.columns)
    if missing:
        raise ValueError(f"CSV de fonte sem colunas {sorted(missing)}: {path}")
    points = df[["x1", "x2"]].to_numpy(dtype=float)
    interp = LinearNDInterpolator(points, df["f"].to_numpy(dtype=float), fill_value=1.0)

    def f(x1, x2):
        return interp(x1, x2)

    log.info("Fonte tabelada carregada: %s (%d amostras)", path, len(df))
    return SourceField(eval=f, c0=c0, beta=beta, name=f"tabulated:{Path(path).name}")


BUILTIN_SOURCES: dict[str, Callable[..., SourceField]] = {
    "constant": constant,
    "rational": rational,
    "gaussian": gaussian,
    "anisotropic": anisotropic,
    "angular": angular,
    "odd": odd,
}
