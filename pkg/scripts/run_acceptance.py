"""
run_acceptance.py: Bateria de aceitação do Ampere2D em escala de desktop

Uso:
    python scripts/run_acceptance.py
    python scripts/run_acceptance.py --only 1 2 8

Executa cada critério na resolução padrão (N_r = 256, N_θ = 64, R_max = 64)
e imprime uma tabela passa/falha. Código de saída 0 somente se todos passarem.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path
from typing import Callable

# Garante que o projeto raiz está no sys.path
ROOT_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT_DIR))

import numpy as np

from app.errors import AmpereError
from app.modules.asymptotics.service import observed_order, residual_report
from app.modules.core.pipeline import run_oracle_compare, run_probe_green
from app.modules.elliptic.service import separable_apply
from app.modules.exterior.kelvin import kelvin_coefficients
from app.modules.exterior.service import solve_exterior, uniqueness_check
from app.modules.grid.polar import PolarGrid
from app.modules.ingest.source import BoundaryData, ExteriorSpec, angular, constant, rational
from app.modules.iteration.service import certify_truncation, solve_global
from app.modules.radial.service import CoefficientField
from app.schemas import parse_problem

N_R, N_THETA, R_MAX = 256, 64, 64.0
TOL = 1e-10

Check = Callable[[], tuple[bool, str]]


def _grid(n_r: int = N_R, r_max: float = R_MAX, knee: float = 1.0) -> PolarGrid:
    return PolarGrid.graded(n_r, r_max, N_THETA, "global", r0=knee)


# ══════════════════════════════════════════════
# CRITÉRIOS
# ══════════════════════════════════════════════

def check_fixed_point() -> tuple[bool, str]:
    sol = solve_global(constant(), None, _grid(), TOL)
    x1, x2 = sol.grid.mesh
    err = float(np.max(np.abs(sol.v.values - 0.5 * (x1**2 + x2**2))))
    first = sol.history[1]["sup_psi"] if len(sol.history) > 1 else 0.0
    return err <= 1e-6 and first <= TOL, f"sup|u − ½|x|²| = {err:.2e}, sup ψ¹ = {first:.1e}"


def check_mass_identity() -> tuple[bool, str]:
    sol = solve_global(rational(0.1, 4.0), None, _grid(), TOL)
    return abs(sol.fit.d_fit - 0.05) <= 1e-4, f"d_fit = {sol.fit.d_fit:.8f} (esperado 0.05)"


def check_contraction() -> tuple[bool, str]:
    sol = solve_global(angular(0.1), None, _grid(), TOL)
    sups = [h["weighted_sup"] for h in sol.history if h["weighted_sup"] > 0]
    ratios = [b / a for a, b in zip(sups[:-1], sups[1:])]
    worst = max(ratios) if ratios else 0.0
    return worst <= 0.5, f"razão máxima = {worst:.3f} em {len(sol.history)} níveis"


def check_residual_and_order() -> tuple[bool, str]:
    f = rational(0.1, 4.0)
    errors, steps = [], []
    for n_r in (128, 256):
        sol = solve_global(f, None, _grid(n_r), TOL)
        rep = residual_report(sol.v, sol.f1)
        errors.append(rep.max_residual)
        steps.append(1.0 / n_r)
    order = observed_order(np.array(steps), np.array(errors))
    return errors[-1] <= 5e-6 and order >= 1.8, f"resíduo = {errors[-1]:.2e}, ordem = {order:.2f}"


def check_decay() -> tuple[bool, str]:
    sol = solve_global(rational(0.1, 4.0), None, _grid(), TOL)
    table = sol.fit.residual_table
    ok = table[:, 1] > 1e-14
    if ok.sum() < 2:
        return True, "resíduo abaixo do piso de arredondamento"
    slope = float(np.polyfit(np.log(table[ok, 0]), np.log(table[ok, 1]), 1)[0])
    return slope <= -0.5, f"inclinação = {slope:.2f} (σ_fit = {sol.fit.sigma_fit})"


def check_truncation() -> tuple[bool, str]:
    f = rational(0.1, 4.0)
    sol = solve_global(f, None, _grid(), TOL)
    cert = certify_truncation(f, None, sol, TOL)
    ok = cert["delta_d_fit"] <= 1e-4 and cert["delta_c_fit"] <= 1e-3
    return ok, f"Δd = {cert['delta_d_fit']:.1e}, Δc = {cert['delta_c_fit']:.1e}"


def check_oracle() -> tuple[bool, str]:
    cfg = parse_problem({"name": "oraculo", "source": {"family": "rational", "params": {"epsilon": 0.1}},
                         "oracle": {"radius": 4.0, "n": 129}})
    result = run_oracle_compare(cfg)
    diff = result.summary["sup_difference"]
    return diff <= 5e-3, f"sup|u − u_h| = {diff:.2e}"


def _radial_exterior_reference(r: np.ndarray) -> np.ndarray:
    # U′ = √(r² + 1), U(1) = ½
    def primitive(s):
        return 0.5 * (s * np.sqrt(s * s + 1.0) + np.arcsinh(s))
    return 0.5 + primitive(r) - primitive(1.0)


def check_exterior_radial() -> tuple[bool, str]:
    spec = ExteriorSpec(r0=1.0, boundary_data=BoundaryData.radial(1.0), d_target=0.5)
    sol = solve_exterior(spec, constant(), _grid(knee=1.0), TOL)
    keep = sol.grid.radii <= R_MAX / 2
    ref = _radial_exterior_reference(sol.grid.radii[keep])[:, None]
    diff = float(np.max(np.abs(sol.u.values[keep] - ref)))
    ok = abs(sol.fit.d_fit - 0.5) <= 1e-3 and diff <= 1e-4 and sol.state.boundary_error <= 1e-6
    return ok, f"d_fit = {sol.fit.d_fit:.6f}, sup dif = {diff:.1e}, contorno = {sol.state.boundary_error:.1e}"


def check_uniqueness() -> tuple[bool, str]:
    spec = ExteriorSpec(r0=1.0, boundary_data=BoundaryData.harmonic(0.5, [(0.01, 2, 0.0)]), d_target=0.5)
    report = uniqueness_check(spec, constant(), _grid(knee=1.0), TOL)
    return report["sup_difference"] <= 1e-4, f"sup|u₁ − u₂| = {report['sup_difference']:.1e}"


def check_kelvin() -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    y = rng.uniform(-1.0, 1.0, size=(1000, 2))

    def identity(x1, x2):
        return np.broadcast_to(np.eye(2), np.shape(x1) + (2, 2)).copy()

    b_mat, b_vec = kelvin_coefficients(identity, y)
    err_id = max(float(np.max(np.abs(b_mat - np.eye(2)))), float(np.max(np.abs(b_vec))))

    def spd(x1, x2):
        out = np.empty(np.shape(x1) + (2, 2))
        out[..., 0, 0] = 2.0 + np.sin(x1)
        out[..., 1, 1] = 1.5 + np.cos(x2)
        out[..., 0, 1] = out[..., 1, 0] = 0.3 * np.sin(x1 * x2)
        return out

    b_mat, _ = kelvin_coefficients(spd, y)
    n2 = np.sum(y * y, axis=1)
    a = spd(y[:, 0] / n2, y[:, 1] / n2)
    err_eig = float(np.max(np.abs(np.linalg.eigvalsh(b_mat) - np.linalg.eigvalsh(a))))
    return err_id <= 1e-12 and err_eig <= 1e-10, f"identidade {err_id:.1e}, autovalores {err_eig:.1e}"


def check_green() -> tuple[bool, str]:
    cfg = parse_problem({"name": "green", "source": {"family": "rational", "params": {"epsilon": 0.1}},
                         "grid": {"n_r": 128}})
    result = run_probe_green(cfg)
    change = result.summary["refinement_change"]
    ok = change is not None and math.isfinite(change) and change <= 0.1
    shown = f"{change:.1%}" if ok else str(change)
    return ok, f"c₂ = {result.summary['c2_fit']:.4g}, variação no refinamento = {shown}"


def check_separable_identity() -> tuple[bool, str]:
    grid = _grid(128)
    r = grid.radii
    p, q = 1.0 + 0.1 / (1.0 + r**2), 1.0 - 0.1 / (1.0 + r**2)
    th = grid.theta[None, :]
    coeffs = CoefficientField.from_components(
        grid.field(p[:, None] * np.cos(th) ** 2 + q[:, None] * np.sin(th) ** 2),
        grid.field((p - q)[:, None] * np.sin(th) * np.cos(th)),
        grid.field(p[:, None] * np.sin(th) ** 2 + q[:, None] * np.cos(th) ** 2),
    )
    rng = np.random.default_rng(1)
    worst = 0.0
    x1, x2 = grid.mesh
    for _ in range(50):
        c = rng.normal(size=4)
        field = grid.field(np.exp(-0.01 * (x1**2 + x2**2)) * (c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x2))
        diff = coeffs.apply(field).values[1:] - separable_apply(field, p, q).values[1:]
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst <= 1e-8, f"sup diferença = {worst:.1e}"


CHECKS: dict[int, tuple[str, Check]] = {
    1: ("Ponto fixo f ≡ 1", check_fixed_point),
    2: ("Identidade de massa", check_mass_identity),
    3: ("Contração", check_contraction),
    4: ("Resíduo e ordem", check_residual_and_order),
    5: ("Decaimento", check_decay),
    6: ("Truncamento", check_truncation),
    7: ("Oráculo", check_oracle),
    8: ("Exterior radial", check_exterior_radial),
    9: ("Unicidade", check_uniqueness),
    10: ("Identidades de Kelvin", check_kelvin),
    11: ("Sonda de Green", check_green),
    12: ("Operador separável", check_separable_identity),
}


def main() -> int:
    parser = argparse.ArgumentParser(description="Bateria de aceitação do Ampere2D")
    parser.add_argument("--only", type=int, nargs="*", default=None, help="Números dos critérios")
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    print("=" * 72)
    print("Ampere2D: Bateria de aceitação")
    print("=" * 72)
    failures = 0
    for number in args.only or sorted(CHECKS):
        name, check = CHECKS[number]
        start = time.perf_counter()
        try:
            ok, detail = check()
        except (AmpereError, ValueError, RuntimeError) as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - start
        failures += not ok
        print(f"{'✅' if ok else '❌'} {number:>2}. {name:<24} {elapsed:6.1f}s  {detail}")
    print("─" * 72)
    print(f"{len(args.only or CHECKS) - failures} passaram, {failures} falharam")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
