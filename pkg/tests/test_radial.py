import json
import math

import numpy as np
import pytest

from app.errors import CoefficientDegeneracyError, DegenerateSourceError
from app.modules.grid.polar import PolarGrid, cartesian_hessian
from app.modules.ingest.service import spherical_average
from app.modules.ingest.source import SourceField, constant, rational
from app.modules.radial.repository import profile_to_frame, save_profile
from app.modules.radial.service import (
    CoefficientField,
    build_coefficients,
    build_radial_solution,
    coefficients_from_hessian,
    compute_d,
    mass_tail_bound,
)


def _profile(f, grid):
    return build_radial_solution(spherical_average(f, grid.radii, n_theta=64))


def test_unit_source_gives_paraboloid(small_grid):
    profile = _profile(constant(), small_grid)
    r = small_grid.radii
    np.testing.assert_allclose(profile.U, 0.5 * r**2, atol=1e-9)
    np.testing.assert_allclose(profile.F1, 1.0, atol=1e-12)
    np.testing.assert_allclose(profile.F2, 0.0, atol=1e-12)
    assert profile.d == pytest.approx(0.0, abs=1e-14)
    assert profile.c_d == pytest.approx(0.0, abs=1e-12)


def test_mass_of_rational_source(small_grid):
    profile = _profile(rational(0.1), small_grid)
    r_max = small_grid.r_max
    assert profile.d == pytest.approx(0.05 * (1.0 - 1.0 / (1.0 + r_max**2)), abs=1e-11)


def test_first_derivative_identity(small_grid):
    profile = _profile(rational(0.1), small_grid)
    r = small_grid.radii
    # U′² = r² + 2∫₀^r t(f̃ − 1) dt, e no infinito U′² − r² → 2d
    assert profile.Uprime[-1] ** 2 - r[-1] ** 2 == pytest.approx(2.0 * profile.d, rel=1e-8)
    # U″ = r f̃ / U′ ⇒ det D²U = U″·U′/r = f̃
    np.testing.assert_allclose((profile.q * profile.p)[1:], profile.ftilde[1:], rtol=1e-12)


def test_log_constant_matches_profile_tail():
    grid = PolarGrid.graded(128, 64.0, 32, "global")
    profile = _profile(rational(0.1), grid)
    r_max = grid.r_max
    tail = profile.U[-1] - 0.5 * r_max**2 - profile.d * math.log(r_max)
    assert tail == pytest.approx(profile.c_d, abs=1e-6)


def test_compute_d_with_explicit_truncation(small_grid):
    table = spherical_average(rational(0.1), small_grid.radii)
    assert compute_d(table, r_max=4.0) == pytest.approx(0.05 * (1.0 - 1.0 / 17.0), abs=1e-11)


def test_degenerate_source_raises(small_grid):
    negative = SourceField(eval=lambda x1, x2: -np.ones_like(x1), c0=1.0, beta=4.0)
    with pytest.raises(DegenerateSourceError):
        _profile(negative, small_grid)


def test_mass_tail_bound():
    assert mass_tail_bound(1.0, 4.0, 10.0) == pytest.approx(0.005)
    assert math.isinf(mass_tail_bound(1.0, 2.0, 10.0))


# ── Coeficientes ────────────────────────────────────────────────

def test_unit_source_coefficients_are_identity(small_grid):
    coeffs = build_coefficients(_profile(constant(), small_grid), small_grid)
    np.testing.assert_allclose(coeffs.a11.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(coeffs.a12.values, 0.0, atol=1e-12)
    assert coeffs.lambda_min == pytest.approx(1.0, abs=1e-12)
    assert coeffs.closeness_constant() < 1e-8
    assert coeffs.deviation_radius(0.1) == 0.0


def test_radial_coefficients_are_elliptic_and_close(small_grid):
    coeffs = build_coefficients(_profile(rational(0.1), small_grid), small_grid)
    assert coeffs.lambda_min > 0.9
    assert coeffs.lambda_max < 1.1
    p, q, s = coeffs.radial_part()
    a_rr, a_tt, a_rt, _ = coeffs.polar_components()
    np.testing.assert_allclose(a_rr, np.broadcast_to(p[:, None], a_rr.shape), atol=1e-12)
    np.testing.assert_allclose(a_tt, np.broadcast_to(q[:, None], a_tt.shape), atol=1e-12)
    np.testing.assert_allclose(a_rt, 0.0, atol=1e-12)
    assert np.all(s == 0.0)


def test_coefficients_from_hessian_is_cofactor(small_grid):
    field = small_grid.sample(lambda x1, x2: x1**2 + 0.5 * x1 * x2 + 2.0 * x2**2)
    coeffs = coefficients_from_hessian(cartesian_hessian(field))
    np.testing.assert_allclose(coeffs.a11.values, 4.0, atol=1e-8)
    np.testing.assert_allclose(coeffs.a22.values, 2.0, atol=1e-8)
    np.testing.assert_allclose(coeffs.a12.values, -0.5, atol=1e-8)


def test_non_elliptic_coefficients_are_rejected(small_grid):
    with pytest.raises(CoefficientDegeneracyError):
        CoefficientField.from_components(small_grid.field(1.0), small_grid.field(2.0), small_grid.field(1.0))


def test_evaluator_uses_far_field_beyond_truncation(small_grid):
    coeffs = build_coefficients(_profile(rational(0.1), small_grid), small_grid)
    a = coeffs.evaluator()(np.array([100.0]), np.array([0.0]))
    d = coeffs.far_field_d
    assert a[0, 0, 0] == pytest.approx(1.0 + d / 100.0**2)
    assert a[0, 1, 1] == pytest.approx(1.0 - d / 100.0**2)


def test_save_profile_writes_sidecar(tmp_path, small_grid):
    profile = _profile(rational(0.1), small_grid)
    csv_path, json_path = save_profile(profile, tmp_path / "profile.csv")
    assert csv_path.exists()
    meta = json.loads(json_path.read_text(encoding="utf-8"))
    assert meta["d"] == pytest.approx(profile.d)
    assert list(profile_to_frame(profile).columns) == ["r", "ftilde", "U", "Uprime", "Usecond", "F1", "F2"]
