"""
Source Validation Service v1.0
==============================
Verifica numericamente as hipóteses sobre a fonte f por amostragem:

  decaimento  1/c₀ ≤ f ≤ c₀  e  |f − 1| ≤ c₀(1+|x|)^(−β),  β > 2
  proximidade  f₁ próxima da sua média esférica f̃₁ (ε₀, ε₁; derivadas de ordem 0 e 1)

e produz a fonte normalizada f₁(y) = f(A^(−1/2) y) e a média esférica f̃₁.

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from app.config import get_settings
from app.errors import InvalidSourceError
from app.modules.ingest.source import AffineData, BoundaryData, ExteriorSpec, SourceField

log = logging.getLogger("ampere2d.ingest.validation")

# ────────────────────────────────────────────────────────────────
# CONSTANTES DE AMOSTRAGEM
# ────────────────────────────────────────────────────────────────
_MIN_ANGLES = 16
_DECAY_WINDOW_FRACTION = 1.0 / 8.0   # β ajustado em [R_max/8, R_max]
_ZERO_FLOOR = 1e-300
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class SamplingPlan:
    """Raios geométricos {0} ∪ {r_min·2^(j/p)} até R_max, n_theta ângulos por raio."""

    r_max: float = 64.0
    r_min: float = 1.0 / 16.0
    n_theta: int = 64
    points_per_octave: int = 4

    def __post_init__(self) -> None:
        if self.n_theta < _MIN_ANGLES:
            raise ValueError(f"Plano de amostragem exige ≥ {_MIN_ANGLES} ângulos (recebeu {self.n_theta}).")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("Plano de amostragem exige 0 < r_min < r_max.")

    @property
    def radii(self) -> np.ndarray:
        n = int(math.floor(self.points_per_octave * math.log2(self.r_max / self.r_min) + 1e-9))
        geo = self.r_min * 2.0 ** (np.arange(n + 1) / self.points_per_octave)
        if geo[-1] < self.r_max * (1 - 1e-12):
            geo = np.append(geo, self.r_max)
        return np.concatenate([[0.0], geo])

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.radii[:, None]
        return r * np.cos(self.theta)[None, :], r * np.sin(self.theta)[None, :]


@dataclass
class Violation:
    """Desigualdade violada e o pior ponto amostrado."""
    check: str
    inequality: str
    value: float
    bound: float
    point: tuple[float, float] | None = None


@dataclass
class ValidationReport:
    c0_fit: float
    beta_fit: float
    beta1: float                  # beta_fit/2 + 1
    eps0_fit: float               # sup |D^m(f₁ − f̃₁)|, m = 0, 1
    eps1_fit: float               # sup (1+|y|)^β₁ |D^m(f₁ − f̃₁)|
    passed: bool
    violations: list[Violation] = field(default_factory=list)
    source: str = "custom"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class RadialTable:
    """f̃₁ tabelada nos raios e avaliável em raios arbitrários (mesma regra de trapézio)."""

    r: np.ndarray
    values: np.ndarray
    source: SourceField
    n_theta: int = 64

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return _angular_mean(self.source, r.ravel(), self.n_theta).reshape(r.shape)


def _angular_mean(f: SourceField, radii: np.ndarray, n_theta: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    r = radii[:, None]
    return np.mean(f(r * np.cos(theta)[None, :], r * np.sin(theta)[None, :]), axis=1)


# ────────────────────────────────────────────────────────────────
# OPERAÇÕES
# ────────────────────────────────────────────────────────────────

def normalize_source(f: SourceField, aff: AffineData) -> SourceField:
    """f₁(y) = f(A^(−1/2) y); o gradiente segue pela regra da cadeia (A^(−1/2) é simétrica)."""
    if aff.is_identity:
        return f
    m = aff.sqrtA_inv

    def to_x(y1, y2):
        return m[0, 0] * y1 + m[0, 1] * y2, m[1, 0] * y1 + m[1, 1] * y2

    def f1(y1, y2):
        return f(*to_x(y1, y2))

    def grad1(y1, y2):
        g1, g2 = f.gradient(*to_x(y1, y2))
        return m[0, 0] * g1 + m[1, 0] * g2, m[0, 1] * g1 + m[1, 1] * g2

    return SourceField(eval=f1, grad_eval=grad1, c0=f.c0, beta=f.beta, k_smooth=f.k_smooth,
                       name=f"{f.name}∘A^-1/2", params=dict(f.params))


def spherical_average(f1: SourceField, radii: np.ndarray, n_theta: int = 64) -> RadialTable:
    """f̃₁(r) = (1/2π)∫ f₁(r e^{iθ}) dθ pela regra do trapézio com n_theta ângulos."""
    radii = np.asarray(radii, dtype=float)
    if radii[0] != 0.0 or np.any(np.diff(radii) <= 0):
        raise ValueError("Raios da média esférica devem ser crescentes e começar em 0.")
    return RadialTable(r=radii, values=_angular_mean(f1, radii, n_theta), source=f1, n_theta=n_theta)


def annulus_mass(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    r_lo: float,
    r_hi: float,
    *,
    n_theta: int = 64,
    breaks: list[float] | None = None,
) -> float:
    """(1/2π)∫_{r_lo<|x|<r_hi}(f − 1) = ∫ r(f̃ − 1) dr, média angular pelo trapézio."""
    def integrand(r):
        return r * (_angular_mean(f, np.array([r]), n_theta)[0] - 1.0)

    value, _ = quad(integrand, r_lo, r_hi, points=breaks, limit=400, epsabs=1e-13, epsrel=1e-11)
    return float(value)


class SourceValidationService:
    """Checagem por amostragem das hipóteses de decaimento e de proximidade radial."""

    @staticmethod
    def _evaluate(f: SourceField, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        vals = f(x1, x2)
        bad = ~np.isfinite(vals)
        if bad.any():
            i = np.argwhere(bad)[0]
            raise InvalidSourceError((float(x1[tuple(i)]), float(x2[tuple(i)])), float(vals[tuple(i)]))
        return vals

    @staticmethod
    def _fit_beta(radii: np.ndarray, dev: np.ndarray, r_max: float) -> float:
        sup_dev = dev.max(axis=1)
        window = (radii >= r_max * _DECAY_WINDOW_FRACTION) & (sup_dev > _ZERO_FLOOR)
        if window.sum() < 2:
            return math.inf
        slope = np.polyfit(np.log(radii[window]), np.log(sup_dev[window]), 1)[0]
        return float(-slope)

    @staticmethod
    def _deviation(f1: SourceField, plan: SamplingPlan) -> tuple[np.ndarray, np.ndarray]:
        """|f₁ − f̃₁| e |∇f₁ − f̃₁′(r) ŷ| nos pontos do plano."""
        y1, y2 = plan.points()
        theta = plan.theta[None, :]
        vals = f1(y1, y2)
        g1, g2 = f1.gradient(y1, y2)
        radial_deriv = g1 * np.cos(theta) + g2 * np.sin(theta)
        mean_val = vals.mean(axis=1, keepdims=True)
        mean_rad = radial_deriv.mean(axis=1, keepdims=True)
        mean_rad[plan.radii == 0.0] = 0.0
        d0 = np.abs(vals - mean_val)
        d1 = np.hypot(g1 - mean_rad * np.cos(theta), g2 - mean_rad * np.sin(theta))
        return d0, d1

    @classmethod
    def validate_source(
        cls,
        f: SourceField,
        plan: SamplingPlan | None = None,
        aff: AffineData | None = None,
        *,
        eps0_threshold: float | None = None,
    ) -> ValidationReport:
        """
        Valida as hipóteses sobre f nas amostras do plano.

        Args:
            f: Fonte a validar.
            plan: Plano de amostragem (padrão: R_max = 64, 64 ângulos).
            aff: Dados afins usados para f₁ (padrão: identidade).
            eps0_threshold: Limiar de ε₀ (padrão: AMPERE2D_EPS0_THRESHOLD).

        Returns:
            ValidationReport; quando passed=False, ``violations`` lista cada
            desigualdade violada com o pior ponto amostrado.

        Raises:
            InvalidSourceError: valor não finito em algum ponto amostrado.
        """
        plan = plan or SamplingPlan()
        aff = aff or AffineData.identity()
        eps0_threshold = eps0_threshold if eps0_threshold is not None else get_settings().eps0_threshold
        x1, x2 = plan.points()
        vals = cls._evaluate(f, x1, x2)
        radii = plan.radii
        violations: list[Violation] = []

        def worst(mask_values: np.ndarray) -> tuple[float, float]:
            i = np.unravel_index(int(np.argmax(mask_values)), mask_values.shape)
            return float(x1[i]), float(x2[i])

        # ── limites bilaterais ────────────────────────────
        c0_fit = float(max(vals.max(), 1.0 / vals.min())) if vals.min() > 0 else math.inf
        if vals.max() > f.c0 * (1 + _BOUND_SLACK):
            violations.append(Violation("upper_bound", "f(x) ≤ c0", float(vals.max()), f.c0, worst(vals)))
        if vals.min() <= 0 or vals.min() < (1.0 / f.c0) * (1 - _BOUND_SLACK):
            violations.append(Violation("lower_bound", "f(x) ≥ 1/c0", float(vals.min()), 1.0 / f.c0, worst(-vals)))

        # ── decaimento ────────────────────────────────────
        dev = np.abs(vals - 1.0)
        envelope = f.c0 * (1.0 + radii[:, None]) ** (-f.beta)
        excess = dev - envelope
        if excess.max() > _BOUND_SLACK:
            violations.append(Violation("decay_bound", "|f(x) − 1| ≤ c0·(1+|x|)^(−β)",
                                        float(dev.flat[np.argmax(excess)]), float(envelope.flat[np.argmax(excess)]),
                                        worst(excess)))
        if not f.beta > 2:
            violations.append(Violation("declared_beta", "β > 2", float(f.beta), 2.0))
        beta_fit = cls._fit_beta(radii, dev, plan.r_max)
        if beta_fit <= 2:
            i_far = (len(radii) - 1, int(np.argmax(dev[-1])))
            violations.append(Violation("decay_exponent", "β_fit > 2", beta_fit, 2.0,
                                        (float(x1[i_far]), float(x2[i_far]))))
        beta1 = beta_fit / 2 + 1

        # ── proximidade da média esférica ───────────────
        f1 = normalize_source(f, aff)
        d0, d1 = cls._deviation(f1, plan)
        dm = np.maximum(d0, d1)
        eps0_fit = float(dm.max())
        weight_exp = beta1 if math.isfinite(beta1) else f.beta / 2 + 1
        weighted = (1.0 + radii[:, None]) ** weight_exp * dm
        eps1_fit = float(weighted.max())
        if eps0_fit > eps0_threshold:
            violations.append(Violation("eps0", "sup|D^m(f1 − f̃1)| ≤ ε₀", eps0_fit, eps0_threshold, worst(dm)))

        report = ValidationReport(
            c0_fit=c0_fit,
            beta_fit=beta_fit,
            beta1=beta1,
            eps0_fit=eps0_fit,
            eps1_fit=eps1_fit,
            passed=not violations,
            violations=violations,
            source=f.name,
        )
        if report.passed:
            log.info("Fonte %s validada: c0_fit=%.4g beta_fit=%.3g eps0=%.3e", f.name, c0_fit, beta_fit, eps0_fit)
        else:
            log.warning("Fonte %s reprovada: %s", f.name, ", ".join(v.check for v in violations))
        return report

    # ────────────────────────────────────────────────────────────
    # DADOS EXTERIORES
    # ────────────────────────────────────────────────────────────

    @staticmethod
    def exterior_mass(f: SourceField, r0: float, r_max: float, n_theta: int = 64) -> float:
        """(1/2π)∫_{r₀<|x|<R_max}(f − 1) por quadratura radial adaptativa."""
        breaks = list(np.geomspace(r0, r_max, 8)[1:-1])
        return annulus_mass(f, r0, r_max, n_theta=n_theta, breaks=breaks)

    @staticmethod
    def holder_seminorm(phi: BoundaryData, r0: float, alpha: float, n_samples: int = 512) -> float:
        """[φ]_α em ∂B_{r₀} por maximização sobre todos os pares de amostras (distância de corda)."""
        theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
        vals = phi(theta)
        dv = np.abs(vals[:, None] - vals[None, :])
        chord = 2.0 * r0 * np.abs(np.sin(0.5 * (theta[:, None] - theta[None, :])))
        np.fill_diagonal(chord, np.inf)
        return float(np.max(dv / chord**alpha))

    @classmethod
    def check_exterior_spec(cls, spec: ExteriorSpec, f: SourceField, *, r_max: float = 64.0,
                            eps0_threshold: float | None = None) -> list[Violation]:
        """Admissibilidade de d_target e pequenez do dado de contorno."""
        eps0_threshold = eps0_threshold if eps0_threshold is not None else get_settings().eps0_threshold
        violations: list[Violation] = []
        bound = cls.exterior_mass(f, spec.r0, r_max) - spec.r0**2 / 2
        if not spec.d_target > bound:
            violations.append(Violation("admissibility", "d > (1/2π)∫_{|x|>r₀}(f−1) − r₀²/2", spec.d_target, bound))
        seminorm = cls.holder_seminorm(spec.boundary_data, spec.r0, spec.alpha)
        if seminorm > eps0_threshold:
            violations.append(Violation("boundary_holder", "[φ]_α ≤ ε₀", seminorm, eps0_threshold))
        return violations
