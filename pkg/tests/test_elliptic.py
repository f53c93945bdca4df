import numpy as np
import pytest

from app.errors import IllPosedModeError, NonPerturbativeCoefficientsError
from app.modules.elliptic.green_service import mollified_delta, probe_green
from app.modules.elliptic.mode_solver import BoundaryCondition, ModeBVP, apply_mode_operator, solve_mode_bvp
from app.modules.elliptic.service import BoundarySpec, mode_content, residual, separable_apply, solve_linearized
from app.modules.grid.polar import PolarGrid
from app.modules.ingest.service import spherical_average
from app.modules.ingest.source import rational
from app.modules.radial.service import CoefficientField, build_coefficients, build_radial_solution


def _constant_matrix(grid: PolarGrid, a11: float, a12: float, a22: float) -> CoefficientField:
    return CoefficientField.from_components(grid.field(a11), grid.field(a12), grid.field(a22))


def _rational_coefficients(grid: PolarGrid) -> CoefficientField:
    table = spherical_average(rational(0.1), grid.radii, n_theta=64)
    return build_coefficients(build_radial_solution(table), grid)


def test_poisson_reproduces_quadratic(small_grid):
    coeffs = CoefficientField.identity(small_grid)
    r_max = small_grid.r_max
    psi = solve_linearized(coeffs, small_grid.field(4.0), BoundarySpec(outer=r_max**2))
    x1, x2 = small_grid.mesh
    np.testing.assert_allclose(psi.values, x1**2 + x2**2, atol=1e-6)
    assert psi.meta["iterations"] == 0
    assert psi.meta["residual"] < 1e-6


def test_defect_correction_with_constant_anisotropy(small_grid):
    coeffs = _constant_matrix(small_grid, 1.1, 0.05, 1.0)
    r_max = small_grid.r_max
    outer = r_max**2 * np.cos(small_grid.theta) ** 2
    psi = solve_linearized(coeffs, small_grid.field(2.2), BoundarySpec(outer=outer))
    x1, _ = small_grid.mesh
    np.testing.assert_allclose(psi.values, x1**2, atol=1e-5)
    assert psi.meta["iterations"] > 0
    assert psi.meta["delta_a"] > 0


def test_strong_anisotropy_is_non_perturbative(small_grid):
    coeffs = _constant_matrix(small_grid, 100.0, 0.0, 0.01)
    x1, x2 = small_grid.mesh
    g = small_grid.field(np.exp(-(x1**2 + 2 * x2**2)) * (1 + x1))
    with pytest.raises(NonPerturbativeCoefficientsError):
        solve_linearized(coeffs, g, BoundarySpec())


def test_robin_far_field_solves(small_grid):
    coeffs = _rational_coefficients(small_grid)
    x1, x2 = small_grid.mesh
    g = small_grid.field(np.exp(-(x1**2 + x2**2)) * x1 * x2)
    psi = solve_linearized(coeffs, g, BoundarySpec(far_field="robin", tau=0.9))
    assert residual(coeffs, psi, g) < 1e-8
    assert mode_content(psi, tol=1e-8) == [2]


def test_separable_operator_matches_cartesian(small_grid):
    r = small_grid.radii
    p, q = 1.0 + 0.1 / (1.0 + r**2), 1.0 - 0.1 / (1.0 + r**2)
    th = small_grid.theta[None, :]
    coeffs = CoefficientField.from_components(
        small_grid.field(p[:, None] * np.cos(th) ** 2 + q[:, None] * np.sin(th) ** 2),
        small_grid.field((p - q)[:, None] * np.sin(th) * np.cos(th)),
        small_grid.field(p[:, None] * np.sin(th) ** 2 + q[:, None] * np.cos(th) ** 2),
    )
    rng = np.random.default_rng(3)
    x1, x2 = small_grid.mesh
    for _ in range(5):
        c = rng.normal(size=4)
        field = small_grid.field(np.exp(-0.01 * (x1**2 + x2**2)) * (c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x2))
        diff = coeffs.apply(field).values[1:] - separable_apply(field, p, q).values[1:]
        assert np.max(np.abs(diff)) < 1e-8


def test_mode_operator_inverts_mode_solve(small_grid):
    n = small_grid.n_r
    p, q = np.ones(n), np.ones(n)
    rhs = np.exp(-small_grid.radii**2)
    rhs[-1] = 0.0
    bvp = ModeBVP(m=2, grid=small_grid, p=p, q=q, rhs=rhs,
                  bc_inner=BoundaryCondition.regular(), bc_outer=BoundaryCondition.dirichlet())
    sol = solve_mode_bvp(bvp)
    applied = apply_mode_operator(small_grid, p, q, 2, sol)
    np.testing.assert_allclose(applied[1:-1].real, rhs[1:-1], atol=1e-10)


def test_mode_bvp_rejects_non_positive_coefficients(small_grid):
    n = small_grid.n_r
    with pytest.raises(IllPosedModeError):
        ModeBVP(m=0, grid=small_grid, p=-np.ones(n), q=np.ones(n), rhs=np.zeros(n),
                bc_inner=BoundaryCondition.regular(), bc_outer=BoundaryCondition.dirichlet())


def test_exterior_grid_requires_inner_dirichlet():
    grid = PolarGrid.graded(32, 32.0, 32, "exterior", r0=1.0)
    n = grid.n_r
    with pytest.raises(ValueError):
        ModeBVP(m=0, grid=grid, p=np.ones(n), q=np.ones(n), rhs=np.zeros(n),
                bc_inner=BoundaryCondition.regular(), bc_outer=BoundaryCondition.dirichlet())


def test_exterior_dirichlet_harmonic_mode():
    # Δψ = 0 com ψ = cos θ em r = 1 e ψ = 0 em R_max
    grid = PolarGrid.graded(96, 32.0, 32, "exterior", r0=1.0)
    coeffs = CoefficientField.identity(grid)
    theta = grid.theta
    psi = solve_linearized(coeffs, grid.field(0.0), BoundarySpec(inner=np.cos(theta), outer=0.0))
    r = grid.radii[:, None]
    r_max = grid.r_max
    exact = (r_max / r - r / r_max) / (r_max - 1.0 / r_max) * np.cos(theta)[None, :]
    np.testing.assert_allclose(psi.values, exact, atol=5e-3)


def test_divergence_form_operator_is_symmetric():
    # disco uniforme fino: a quadratura do trapézio é espectral para campos de suporte compacto
    grid = PolarGrid(radii=np.linspace(0.0, 16.0, 2049), n_theta=128, kind="disk")
    coeffs = _constant_matrix(grid, 1.1, 0.05, 1.0)
    phi = grid.sample(lambda x1, x2: np.exp(-0.5 * ((x1 - 8.0) ** 2 + x2**2)))
    psi = grid.sample(lambda x1, x2: np.exp(-0.5 * ((x1 - 7.5) ** 2 + (x2 - 0.8) ** 2)))
    left = coeffs.apply(phi).inner(psi)
    right = phi.inner(coeffs.apply(psi))
    assert abs(left) > 1e-2
    assert abs(left - right) < 1e-8


def test_homogeneous_solution_obeys_maximum_principle(small_grid):
    coeffs = _rational_coefficients(small_grid)
    rng = np.random.default_rng(5)
    modes = np.arange(5)
    a, b = rng.normal(size=5), rng.normal(size=5)

    def boundary(theta):
        return (a[None, :] * np.cos(np.outer(theta, modes)) + b[None, :] * np.sin(np.outer(theta, modes))).sum(axis=1)

    psi = solve_linearized(coeffs, small_grid.field(0.0), BoundarySpec(outer=boundary(small_grid.theta)))
    dense = boundary(np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False))
    inner = psi.values[:-1]
    assert inner.max() <= dense.max() + 1e-6
    assert inner.min() >= dense.min() - 1e-6


# ── Sonda de Green ──────────────────────────────────────────────

def test_mollified_delta_has_unit_mass(medium_grid):
    delta, eps = mollified_delta(medium_grid, (4.0, 0.0))
    assert delta.integrate() == pytest.approx(1.0, rel=1e-12)
    assert eps > 0


def test_green_of_laplacian_is_positive(medium_grid):
    probe = probe_green(CoefficientField.identity(medium_grid), (4.0, 0.0))
    i, j = np.unravel_index(int(np.argmax(probe.values.values)), medium_grid.shape)
    x1, x2 = medium_grid.mesh
    assert np.hypot(x1[i, j] - 4.0, x2[i, j]) < 1.0
    assert probe.c2_fit > 0
    assert np.isfinite(probe.grad_bound_fit)
    assert len(probe.refinement_table) == 1
    assert probe.to_dict()["x"] == [4.0, 0.0]


def test_green_probe_point_restrictions(medium_grid):
    coeffs = CoefficientField.identity(medium_grid)
    with pytest.raises(ValueError):
        probe_green(coeffs, (0.5, 0.0))
    with pytest.raises(ValueError):
        probe_green(coeffs, (20.0, 0.0))


def test_green_refinement_table(small_grid):
    coarse = _rational_coefficients(small_grid)
    fine = _rational_coefficients(PolarGrid.graded(95, 32.0, 64, "global"))
    probe = probe_green(coarse, (4.0, 0.0), refined=fine)
    assert [row["n_theta"] for row in probe.refinement_table] == [32, 64]
