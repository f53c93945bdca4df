from types import SimpleNamespace

import numpy as np
import pytest

from app.errors import IterationBreakdownError, NonConvergenceError
from app.modules.elliptic.service import BoundarySpec
from app.modules.grid.polar import PolarGrid, cartesian_hessian
from app.modules.ingest.service import normalize_source, spherical_average
from app.modules.ingest.source import AffineData, angular, constant, rational
from app.modules.iteration.service import (
    IterationState,
    certify_truncation,
    check_convexity,
    default_tau,
    initial_correction,
    picard_step,
    solve_global,
)
from app.modules.radial.service import build_coefficients, build_radial_solution


def test_default_tau():
    assert default_tau(4.0) == pytest.approx(0.9)
    assert default_tau(3.0) == pytest.approx(0.45)


def test_unit_source_is_a_fixed_point(small_grid):
    sol = solve_global(constant(), None, small_grid, 1e-10)
    x1, x2 = small_grid.mesh
    np.testing.assert_allclose(sol.v.values, 0.5 * (x1**2 + x2**2), atol=1e-9)
    assert sol.converged
    assert sol.levels == 2
    assert sol.history[0]["l"] == 0
    assert sol.history[1]["sup_psi"] < 1e-10
    assert sol.fit.d_fit == pytest.approx(0.0, abs=1e-8)
    assert sol.shift == pytest.approx(0.0, abs=1e-6)


def test_affine_data_enter_the_evaluator(small_grid):
    aff = AffineData(A=np.diag([2.0, 0.5]), b=np.array([0.5, 0.0]), c=1.0)
    sol = solve_global(constant(), aff, small_grid, 1e-10)
    u = sol.u_eval()
    x1, x2 = np.array([1.0, -2.0, 3.0]), np.array([2.0, 0.5, -1.0])
    expected = 0.5 * (2.0 * x1**2 + 0.5 * x2**2) + 0.5 * x1 + 1.0
    np.testing.assert_allclose(u(x1, x2), expected, atol=1e-6)
    assert sol.fit.c_fit == pytest.approx(1.0, abs=1e-6)


def test_radial_source_recovers_mass(small_grid):
    sol = solve_global(rational(0.1), None, small_grid, 1e-10)
    assert sol.profile.d == pytest.approx(0.05, abs=1e-4)
    assert sol.fit.d_fit == pytest.approx(0.05, abs=1e-3)
    # fonte radial: correção φ nula até o arredondamento
    assert sol.history[0]["sup_psi"] < 1e-10


def test_angular_source_contracts(small_grid):
    sol = solve_global(angular(0.1), None, small_grid, 1e-10)
    sups = [entry["weighted_sup"] for entry in sol.history]
    assert sups[-1] < 1e-10
    assert all(b < a for a, b in zip(sups[:-1], sups[1:]))
    assert np.isfinite(sol.history[-1]["residual"])
    summary = sol.summary()
    assert summary["levels"] == len(sol.history)
    assert summary["fit"]["d_fit"] == pytest.approx(sol.fit.d_fit)


def test_level_budget_exhaustion_keeps_history(small_grid):
    with pytest.raises(NonConvergenceError) as info:
        solve_global(angular(0.1), None, small_grid, 1e-10, l_max=1)
    assert [entry["l"] for entry in info.value.history] == [0, 1]


def test_robin_far_field(small_grid):
    sol = solve_global(angular(0.1), None, small_grid, 1e-10, far_field="robin")
    assert sol.converged


def test_global_solve_requires_global_grid():
    grid = PolarGrid.graded(32, 32.0, 32, "exterior", r0=1.0)
    with pytest.raises(ValueError):
        solve_global(constant(), None, grid)


def test_convexity_check_flags_saddle(small_grid):
    saddle = cartesian_hessian(small_grid.sample(lambda x1, x2: x1**2 - x2**2))
    with pytest.raises(IterationBreakdownError) as info:
        check_convexity(saddle, 3)
    assert info.value.level == 3


def test_truncation_certificate(small_grid):
    f = rational(0.1)
    base = solve_global(f, None, small_grid, 1e-10)
    cert = certify_truncation(f, None, base, 1e-10)
    assert cert["r_max_doubled"] == pytest.approx(64.0)
    assert cert["delta_d_fit"] < 1e-3
    assert cert["delta_c_fit"] < 1e-2


def test_certificate_requires_a_knee():
    uniform = PolarGrid(radii=np.linspace(0.0, 32.0, 65), n_theta=32)
    base = SimpleNamespace(grid=uniform)
    with pytest.raises(ValueError, match="joelho"):
        certify_truncation(constant(), None, base, 1e-10)


def test_converged_state_is_a_picard_fixed_point(small_grid):
    f = angular(0.1)
    tau = default_tau(f.beta)
    bc = BoundarySpec(tau=tau)
    f1 = normalize_source(f, AffineData.identity())
    profile = build_radial_solution(spherical_average(f1, small_grid.radii, n_theta=64))
    coeffs = build_coefficients(profile, small_grid)
    f1_grid = small_grid.sample(f1)
    hess_u = cartesian_hessian(profile.field(small_grid))

    phi0 = initial_correction(coeffs, f1_grid, bc=bc, tau=tau)
    state = IterationState(level=0, phi=phi0, psi=phi0, phi_prev=small_grid.field(0.0), tau=tau)
    while state.weighted_sup >= 1e-10 and state.level < 40:
        state = picard_step(state, coeffs, profile, hess_u=hess_u, f1_grid=f1_grid, bc=bc)
    assert state.weighted_sup < 1e-10

    after = picard_step(state, coeffs, profile, hess_u=hess_u, f1_grid=f1_grid, bc=bc)
    assert after.level == state.level + 1
    assert len(after.history) == len(state.history) + 1
    assert (after.phi - state.phi).sup() < 1e-10
    assert after.phi_prev is state.phi
