"""
Mode Solver v1.0
================
Problemas de contorno radiais, um por modo angular m, do operador separável

    p·ψ″ + q·(ψ′/r − m²ψ/r²) + s·ψ′ = rhs

discretizados com o mesmo estêncil radial de 5 pontos da grade polar e
resolvidos por fatoração em banda (scipy.linalg.solve_banded).

Linhas de contorno:
  • origem (grades global/disco): m = 0 → (p₀ + q₀)·ψ″(0) = rhs; m ≠ 0 → ψ(0) = 0
  • r₀ (grade exterior): Dirichlet
  • R_max: Dirichlet ou Robin ψ′ + (τ/R)ψ = valor

Autor: Ampere2D Engine
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from app.config import get_settings
from app.errors import IllPosedModeError
from app.modules.grid.polar import PolarGrid

log = logging.getLogger("ampere2d.elliptic.modes")

BCKind = Literal["regular", "dirichlet", "robin"]


@dataclass(frozen=True)
class BoundaryCondition:
    kind: BCKind = "dirichlet"
    value: complex = 0.0
    tau: float = 0.0

    @classmethod
    def regular(cls) -> "BoundaryCondition":
        return cls(kind="regular")

    @classmethod
    def dirichlet(cls, value: complex = 0.0) -> "BoundaryCondition":
        return cls(kind="dirichlet", value=value)

    @classmethod
    def robin(cls, tau: float, value: complex = 0.0) -> "BoundaryCondition":
        return cls(kind="robin", value=value, tau=tau)


@dataclass(frozen=True, eq=False)
class ModeBVP:
    """Problema de contorno do modo m na grade radial de ``grid``."""

    m: int
    grid: PolarGrid
    p: np.ndarray
    q: np.ndarray
    rhs: np.ndarray
    bc_inner: BoundaryCondition
    bc_outer: BoundaryCondition
    s: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.grid.n_r
        for name in ("p", "q", "rhs"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"ModeBVP.{name} deve ter {n} entradas.")
        if np.any(self.p <= 0) or np.any(self.q <= 0):
            raise IllPosedModeError(self.m, "Coeficientes p, q devem ser positivos.")
        if self.grid.includes_origin and self.bc_inner.kind != "regular":
            raise ValueError("Grades com origem usam a condição de regularidade em r = 0.")
        if not self.grid.includes_origin and self.bc_inner.kind != "dirichlet":
            raise ValueError("Grade exterior exige Dirichlet em r₀.")
        if self.bc_outer.kind not in ("dirichlet", "robin"):
            raise ValueError(f"Condição externa inválida: {self.bc_outer.kind!r}")

    @property
    def drift(self) -> np.ndarray:
        return np.zeros(self.grid.n_r) if self.s is None else self.s


# ────────────────────────────────────────────────────────────────
# MONTAGEM EM BANDA
# ────────────────────────────────────────────────────────────────

def _rows(bvp: ModeBVP) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Linhas esparsas (colunas, valores) e lado direito complexo."""
    grid, m = bvp.grid, bvp.m
    st = grid.stencil
    r = grid.radii
    n = grid.n_r
    sign = -1.0 if m % 2 else 1.0
    s = bvp.drift
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    rhs = np.asarray(bvp.rhs, dtype=complex).copy()

    for i in range(n):
        idx = st.index[i]
        mirror = np.where(st.mirror[i], sign, 1.0)
        if i == 0 and grid.includes_origin:
            if m == 0:
                w = mirror * (bvp.p[0] + bvp.q[0]) * st.d2[0]
                cols.append(idx), vals.append(w)
            else:
                cols.append(np.array([0])), vals.append(np.array([1.0]))
                rhs[0] = 0.0
            continue
        if i == 0:
            cols.append(np.array([0])), vals.append(np.array([1.0]))
            rhs[0] = bvp.bc_inner.value
            continue
        if i == n - 1:
            bc = bvp.bc_outer
            if bc.kind == "dirichlet":
                cols.append(np.array([i])), vals.append(np.array([1.0]))
            else:
                w = st.d1[i].copy()
                w[(idx == i) & ~st.mirror[i]] += bc.tau / r[i]
                cols.append(idx), vals.append(w)
            rhs[i] = bc.value
            continue
        w = mirror * (bvp.p[i] * st.d2[i] + (bvp.q[i] / r[i] + s[i]) * st.d1[i])
        w = w.copy()
        w[(idx == i) & ~st.mirror[i]] -= bvp.q[i] * m * m / r[i] ** 2
        cols.append(idx), vals.append(w)
    return cols, vals, rhs


def _banded(cols: list[np.ndarray], vals: list[np.ndarray]) -> tuple[tuple[int, int], np.ndarray]:
    """Matriz no formato de solve_banded, com (l, u) lidos das linhas."""
    n = len(cols)
    lower = max(int(np.max(i - c)) for i, c in enumerate(cols))
    upper = max(int(np.max(c - i)) for i, c in enumerate(cols))
    lower, upper = max(lower, 0), max(upper, 0)
    ab = np.zeros((lower + upper + 1, n))
    for i, (c, v) in enumerate(zip(cols, vals)):
        np.add.at(ab, (upper + i - c, c), v)
    return (lower, upper), ab


def mode_matrix(bvp: ModeBVP) -> np.ndarray:
    """Matriz densa do problema (diagnóstico e testes)."""
    cols, vals, _ = _rows(bvp)
    n = len(cols)
    mat = np.zeros((n, n))
    for i, (c, v) in enumerate(zip(cols, vals)):
        np.add.at(mat[i], c, v)
    return mat


def solve_mode_bvp(bvp: ModeBVP) -> np.ndarray:
    """
    Resolve o problema do modo m; partes real e imaginária como duas colunas.

    Raises:
        IllPosedModeError: fatoração singular ou solução não finita.
    """
    cols, vals, rhs = _rows(bvp)
    lu, ab = _banded(cols, vals)
    b = np.column_stack([rhs.real, rhs.imag])
    try:
        sol = solve_banded(lu, ab, b, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise IllPosedModeError(bvp.m, str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise IllPosedModeError(bvp.m, "Solução não finita.")
    if np.iscomplexobj(bvp.rhs) or np.iscomplexobj(np.asarray(bvp.bc_outer.value)) \
            or np.iscomplexobj(np.asarray(bvp.bc_inner.value)):
        return sol[:, 0] + 1j * sol[:, 1]
    return sol[:, 0]


def solve_modes(bvps: list[ModeBVP]) -> list[np.ndarray]:
    """Resolve modos independentes, em paralelo até AMPERE2D_THREADS workers."""
    threads = get_settings().threads
    if threads <= 1 or len(bvps) < 2:
        return [solve_mode_bvp(b) for b in bvps]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(solve_mode_bvp, bvps))


def apply_mode_operator(grid: PolarGrid, p: np.ndarray, q: np.ndarray, m: int, values: np.ndarray,
                        s: np.ndarray | None = None) -> np.ndarray:
    """p·ψ″ + q·(ψ′/r − m²ψ/r²) + s·ψ′ discreto nos nós internos (contornos zerados)."""
    bvp = ModeBVP(m=m, grid=grid, p=p, q=q, rhs=np.zeros(grid.n_r),
                  bc_inner=BoundaryCondition.regular() if grid.includes_origin else BoundaryCondition.dirichlet(),
                  bc_outer=BoundaryCondition.dirichlet(), s=s)
    out = mode_matrix(bvp) @ np.asarray(values)
    out[-1] = 0.0
    if not grid.includes_origin or m != 0:
        out[0] = 0.0
    return out
