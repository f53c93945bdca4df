"""
Wide-Stencil Oracle v1.0
========================
Solver independente de det(D²u) = f em discos, usado só para validação
cruzada do pipeline construtivo.

Esquema monótono de estêncil largo numa malha cartesiana uniforme:

    MA_h[u](x) = min_{(e, e⊥)} max(D_ee u, 0) · max(D_e⊥e⊥ u, 0)

sobre pares ortogonais de direções da rede com |componentes| ≤ largura.
Perto do círculo os braços do estêncil são encurtados até o contorno e
usam o dado de Dirichlet no ponto de interseção.

Solver: Newton amortecido (Jacobiano esparso) a partir de Δu = 2√f;
em estagnação, varreduras vermelho-preto com a atualização pontual

    u = (A + B)/2 − √(((A − B)/2)² + f/(α_e α_f)).

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from app.errors import OracleFailureError
from app.modules.grid.polar import PolarField

log = logging.getLogger("ampere2d.oracle")

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

# ────────────────────────────────────────────────────────────────
# CONSTANTES DO SOLVER
# ────────────────────────────────────────────────────────────────
_NEWTON_MAX = 60
_LINE_SEARCH_MAX = 12
_SWEEP_MAX = 20000
_POSITIVE_FLOOR = 1e-8
_MASK_SLACK = 1e-12


@dataclass(frozen=True)
class DirectionalDifference:
    """D_ee u = matrix @ u + const, com α = 2/(a⁺a⁻) (braços a± em unidades físicas)."""

    direction: tuple[int, int]
    matrix: sp.csr_matrix
    const: np.ndarray
    alpha: np.ndarray

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u + self.const


@dataclass(frozen=True)
class StencilScheme:
    """Malha uniforme n × n em [−R, R]² com máscara do disco e direções de largura ``width``."""

    radius: float = 4.0
    n: int = 129
    width: int = 2

    def __post_init__(self) -> None:
        if self.width not in (1, 2, 3):
            raise ValueError(f"Largura do estêncil deve ser 1, 2 ou 3 (recebeu {self.width}).")
        if self.n < 9 or self.n % 2 == 0:
            raise ValueError(f"n deve ser ímpar e ≥ 9 (recebeu {self.n}).")
        if not self.radius > 0:
            raise ValueError("Raio do disco deve ser positivo.")

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def mask(self) -> np.ndarray:
        x1, x2 = self.mesh
        return x1 * x1 + x2 * x2 < self.radius**2 * (1.0 - _MASK_SLACK)

    @cached_property
    def directions(self) -> list[tuple[int, int]]:
        """Direções primitivas do primeiro quadrante (a > 0, b ≥ 0)."""
        w = self.width
        return [(a, b) for a in range(1, w + 1) for b in range(0, w + 1) if math.gcd(a, b) == 1]

    @cached_property
    def pairs(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        return [((a, b), (b, -a)) for a, b in self.directions]

    @property
    def n_directions(self) -> int:
        """Número de direções com sinal (±e para cada e dos pares)."""
        return 4 * len(self.pairs)

    @cached_property
    def interior(self) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.mask)

    @cached_property
    def numbering(self) -> np.ndarray:
        idx = -np.ones(self.mask.shape, dtype=int)
        idx[self.mask] = np.arange(int(self.mask.sum()))
        return idx

    def _arm(self, direction: tuple[int, int], sign: int, g: Evaluator):
        """(coluna do vizinho ou −1, comprimento do braço, valor de contorno) por nó interior."""
        i, j = self.interior
        a, b = sign * direction[0], sign * direction[1]
        ni, nj = i + a, j + b
        inside = (ni >= 0) & (ni < self.n) & (nj >= 0) & (nj < self.n)
        col = np.full(i.shape, -1)
        col[inside] = self.numbering[ni[inside], nj[inside]]
        full = col >= 0
        norm = math.hypot(a, b)
        e1, e2 = a / norm, b / norm
        x1, x2 = self.x[i], self.x[j]
        proj = x1 * e1 + x2 * e2
        t_hit = -proj + np.sqrt(np.maximum(proj * proj - (x1 * x1 + x2 * x2) + self.radius**2, 0.0))
        length = np.where(full, self.h * norm, t_hit)
        boundary = np.zeros(i.shape)
        if (~full).any():
            boundary[~full] = g(x1[~full] + t_hit[~full] * e1, x2[~full] + t_hit[~full] * e2)
        return col, length, boundary

    def differences(self, g: Evaluator) -> list[DirectionalDifference]:
        """Operadores D_ee para cada direção dos pares (braços encurtados junto ao círculo)."""
        m = int(self.mask.sum())
        rows = np.arange(m)
        out = []
        for pair in self.pairs:
            for direction in pair:
                col_p, len_p, g_p = self._arm(direction, +1, g)
                col_m, len_m, g_m = self._arm(direction, -1, g)
                c_p = 2.0 / ((len_p + len_m) * len_p)
                c_m = 2.0 / ((len_p + len_m) * len_m)
                alpha = c_p + c_m
                r_all, c_all, v_all = [rows], [rows], [-alpha]
                const = np.zeros(m)
                for col, coef, gb in ((col_p, c_p, g_p), (col_m, c_m, g_m)):
                    node = col >= 0
                    r_all.append(rows[node])
                    c_all.append(col[node])
                    v_all.append(coef[node])
                    const[~node] += coef[~node] * gb[~node]
                matrix = sp.csr_matrix((np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
                                       shape=(m, m))
                out.append(DirectionalDifference(direction=direction, matrix=matrix, const=const, alpha=alpha))
        return out


def discrete_operator(diffs: list[DirectionalDifference], u: np.ndarray) -> tuple[np.ndarray, np.ndarray, list]:
    """(MA_h[u], índice do par ativo, valores D_ee por direção) nos nós interiores."""
    values = [d(u) for d in diffs]
    products = np.stack([np.maximum(values[2 * k], 0.0) * np.maximum(values[2 * k + 1], 0.0)
                         for k in range(len(diffs) // 2)])
    active = np.argmin(products, axis=0)
    return products[active, np.arange(len(u))], active, values


# ────────────────────────────────────────────────────────────────
# CAMPO DO ORÁCULO
# ────────────────────────────────────────────────────────────────

@dataclass
class OracleField:
    scheme: StencilScheme
    values: np.ndarray            # n × n, NaN fora do disco
    residual: float
    iterations: int
    method: str
    history: list[dict] = field(default_factory=list)

    def interior_values(self) -> np.ndarray:
        return self.values[self.scheme.mask]

    def to_frame(self) -> pd.DataFrame:
        x1, x2 = self.scheme.mesh
        m = self.scheme.mask
        return pd.DataFrame({"x1": x1[m], "x2": x2[m], "u": self.values[m]})


def _assemble_jacobian(diffs, values, active, n_pairs: int) -> sp.csr_matrix:
    m = len(active)
    jac = sp.csr_matrix((m, m))
    for k in range(n_pairs):
        on = (active == k).astype(float)
        if not on.any():
            continue
        de = np.maximum(values[2 * k], _POSITIVE_FLOOR)
        df = np.maximum(values[2 * k + 1], _POSITIVE_FLOOR)
        jac = jac + sp.diags(on * df) @ diffs[2 * k].matrix + sp.diags(on * de) @ diffs[2 * k + 1].matrix
    return jac.tocsc()


def _sweep(diffs, u: np.ndarray, f: np.ndarray, colors: list[np.ndarray]) -> np.ndarray:
    """Uma varredura vermelho-preto da atualização pontual mínima sobre os pares."""
    n_pairs = len(diffs) // 2
    for color in colors:
        values = [d(u) for d in diffs]
        candidates = []
        for k in range(n_pairs):
            de, df = diffs[2 * k], diffs[2 * k + 1]
            a = u + values[2 * k] / de.alpha
            b = u + values[2 * k + 1] / df.alpha
            kk = f / (de.alpha * df.alpha)
            candidates.append(0.5 * (a + b) - np.sqrt(0.25 * (a - b) ** 2 + kk))
        u = u.copy()
        u[color] = np.min(np.stack(candidates), axis=0)[color]
    return u


def initial_guess(scheme: StencilScheme, diffs, f: np.ndarray) -> np.ndarray:
    """Δ_h u = 2√f com o laplaciano de 5 pontos (par axial)."""
    axial = diffs[0].matrix + diffs[1].matrix
    return spsolve(axial.tocsc(), 2.0 * np.sqrt(f) - diffs[0].const - diffs[1].const)


def oracle_solve_disk(
    f: Evaluator,
    boundary_data: Evaluator,
    scheme: StencilScheme | None = None,
    tol: float = 1e-10,
    *,
    max_sweeps: int = _SWEEP_MAX,
) -> OracleField:
    """
    Resolve MA_h[u] = f no disco do esquema com u = g no círculo.

    Args:
        f: Fonte (deve ser positiva no disco).
        boundary_data: g(x1, x2), avaliada nos pontos do círculo.
        scheme: Malha e largura (padrão: R = 4, 129², largura 2).
        tol: Resíduo não linear sup |MA_h[u] − f|.

    Raises:
        OracleFailureError: Newton estagnado e varreduras sem convergência.
    """
    scheme = scheme or StencilScheme()
    x1, x2 = scheme.mesh
    i, j = scheme.interior
    f_int = np.asarray(np.broadcast_to(f(x1[i, j], x2[i, j]), i.shape), dtype=float)
    if np.any(f_int <= 0):
        raise ValueError("Oráculo exige f > 0 no disco.")
    diffs = scheme.differences(boundary_data)
    n_pairs = len(scheme.pairs)
    u = initial_guess(scheme, diffs, f_int)
    history: list[dict] = []
    method = "newton"

    ma, active, values = discrete_operator(diffs, u)
    res = float(np.max(np.abs(ma - f_int)))
    it = 0
    while res >= tol and it < _NEWTON_MAX:
        it += 1
        jac = _assemble_jacobian(diffs, values, active, n_pairs)
        step = spsolve(jac, f_int - ma)
        t, accepted = 1.0, False
        for _ in range(_LINE_SEARCH_MAX):
            trial = u + t * step
            ma_t, active_t, values_t = discrete_operator(diffs, trial)
            res_t = float(np.max(np.abs(ma_t - f_int)))
            if np.isfinite(res_t) and res_t < (1.0 - 0.1 * t) * res:
                accepted = True
                break
            t *= 0.5
        history.append({"iteration": it, "method": "newton", "residual": res_t if accepted else res, "step": t})
        if not accepted:
            log.warning("Newton estagnou na iteração %d (resíduo %.3e); usando varreduras.", it, res)
            method = "sweeps"
            break
        u, ma, active, values, res = trial, ma_t, active_t, values_t, res_t
        log.debug("Newton %d: resíduo %.3e (passo %.3g)", it, res, t)

    if res >= tol:
        method = "sweeps"
        parity = (i + j) % 2
        colors = [parity == 0, parity == 1]
        for sweep in range(1, max_sweeps + 1):
            u = _sweep(diffs, u, f_int, colors)
            ma, _, _ = discrete_operator(diffs, u)
            res = float(np.max(np.abs(ma - f_int)))
            if sweep % 100 == 0:
                history.append({"iteration": it + sweep, "method": "sweeps", "residual": res, "step": 1.0})
            if res < tol:
                it += sweep
                break
        else:
            raise OracleFailureError(f"Oráculo sem convergência após {max_sweeps} varreduras (resíduo {res:.3e}).")

    values_grid = np.full(scheme.mask.shape, np.nan)
    values_grid[scheme.mask] = u
    log.info("Oráculo (%d², largura %d, %d direções): resíduo %.2e via %s em %d iterações",
             scheme.n, scheme.width, scheme.n_directions, res, method, it)
    return OracleField(scheme=scheme, values=values_grid, residual=res, iterations=it, method=method, history=history)


def monotonicity_violations(
    scheme: StencilScheme,
    boundary_data: Evaluator,
    u: np.ndarray,
    n_checks: int = 100,
    seed: int = 0,
    bump: float = 1e-3,
) -> int:
    """
    Perturba ``n_checks`` nós aleatórios (u_k += bump) e conta nós vizinhos cujo
    operador diminuiu; esquema monótono ⇒ 0.
    """
    rng = np.random.default_rng(seed)
    diffs = scheme.differences(boundary_data)
    base, _, _ = discrete_operator(diffs, u)
    violations = 0
    for k in rng.choice(len(u), size=min(n_checks, len(u)), replace=False):
        trial = u.copy()
        trial[k] += bump
        new, _, _ = discrete_operator(diffs, trial)
        others = np.arange(len(u)) != k
        violations += int(np.sum(new[others] < base[others] - 1e-12 * (1.0 + np.abs(base[others]))))
    return violations


# ────────────────────────────────────────────────────────────────
# COMPARAÇÃO COM O PIPELINE
# ────────────────────────────────────────────────────────────────

@dataclass
class OracleComparison:
    sup_difference: float
    table: pd.DataFrame          # r_lo, r_hi, n, sup_diff, mean_diff por anel

    def to_dict(self) -> dict:
        return {"sup_difference": self.sup_difference, "rings": self.table.to_dict(orient="records")}


def compare(pipeline: PolarField | Evaluator, oracle: OracleField, n_rings: int = 8) -> OracleComparison:
    """
    Diferença entre a solução do pipeline (interpolada bicubicamente nos nós
    cartesianos) e o campo do oráculo: sup e tabela por anel.
    """
    evaluate = pipeline.interpolator() if isinstance(pipeline, PolarField) else pipeline
    scheme = oracle.scheme
    x1, x2 = scheme.mesh
    m = scheme.mask
    ref = np.asarray(evaluate(x1[m], x2[m]), dtype=float)
    if not np.all(np.isfinite(ref)):
        raise ValueError("Solução do pipeline não cobre o disco do oráculo.")
    diff = np.abs(ref - oracle.values[m])
    radius = np.hypot(x1[m], x2[m])
    edges = np.linspace(0.0, scheme.radius, n_rings + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (radius >= lo) & (radius < hi)
        rows.append({
            "r_lo": float(lo),
            "r_hi": float(hi),
            "n": int(sel.sum()),
            "sup_diff": float(diff[sel].max()) if sel.any() else math.nan,
            "mean_diff": float(diff[sel].mean()) if sel.any() else math.nan,
        })
    result = OracleComparison(sup_difference=float(diff.max()), table=pd.DataFrame(rows))
    log.info("Comparação pipeline × oráculo: sup=%.3e em %d nós", result.sup_difference, int(m.sum()))
    return result
