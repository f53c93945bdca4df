import numpy as np
import pytest

from app.modules.exterior.kelvin import (
    KelvinCoefficients,
    kelvin_coefficients,
    kelvin_disk_grid,
    kelvin_field,
    to_exterior,
)
from app.modules.grid.polar import PolarGrid
from app.modules.radial.service import CoefficientField


@pytest.fixture
def exterior_grid():
    return PolarGrid.graded(64, 32.0, 32, "exterior", r0=1.0)


@pytest.fixture
def points():
    rng = np.random.default_rng(0)
    return rng.uniform(-1.0, 1.0, size=(200, 2))


def _identity(x1, x2):
    return np.broadcast_to(np.eye(2), np.shape(x1) + (2, 2)).copy()


def _spd(x1, x2):
    out = np.empty(np.shape(x1) + (2, 2))
    out[..., 0, 0] = 2.0 + np.sin(x1)
    out[..., 1, 1] = 1.5 + np.cos(x2)
    out[..., 0, 1] = out[..., 1, 0] = 0.3 * np.sin(x1 * x2)
    return out


def test_identity_is_invariant(points):
    b_mat, b_vec = kelvin_coefficients(_identity, points)
    np.testing.assert_allclose(b_mat, np.broadcast_to(np.eye(2), b_mat.shape), atol=1e-12)
    np.testing.assert_allclose(b_vec, 0.0, atol=1e-12)


def test_reflection_preserves_eigenvalues(points):
    b_mat, _ = kelvin_coefficients(_spd, points)
    n2 = np.sum(points * points, axis=1)
    a = _spd(points[:, 0] / n2, points[:, 1] / n2)
    np.testing.assert_allclose(np.linalg.eigvalsh(b_mat), np.linalg.eigvalsh(a), atol=1e-10)


def test_origin_limit():
    b_mat, b_vec = kelvin_coefficients(_spd, np.zeros((1, 2)))
    np.testing.assert_array_equal(b_mat[0], np.eye(2))
    np.testing.assert_array_equal(b_vec[0], 0.0)


def test_kelvin_coefficients_wrapper():
    kc = KelvinCoefficients(a_eval=_spd, r0=2.0)
    assert kc.domain_radius == pytest.approx(0.5)
    assert kc.b_matrix(np.array([0.1]), np.array([0.2])).shape == (1, 2, 2)
    assert kc.b_vector(np.array([0.1]), np.array([0.2])).shape == (1, 2)


def test_disk_grid_images_exterior_nodes(exterior_grid):
    disk, n_fill = kelvin_disk_grid(exterior_grid)
    assert disk.kind == "disk"
    assert disk.radii[0] == 0.0
    np.testing.assert_allclose(disk.radii[n_fill:], (1.0 / exterior_grid.radii)[::-1], rtol=1e-14)
    assert disk.r_max == pytest.approx(1.0)
    assert np.all(np.diff(disk.radii) > 0)


def test_to_exterior_reverses_rows(exterior_grid):
    disk, n_fill = kelvin_disk_grid(exterior_grid)
    rho = disk.sample(lambda y1, y2: np.hypot(y1, y2))
    back = to_exterior(rho, exterior_grid, n_fill)
    np.testing.assert_allclose(back.values * exterior_grid.radii[:, None], 1.0, rtol=1e-12)


def test_disk_grid_requires_exterior():
    with pytest.raises(ValueError):
        kelvin_disk_grid(PolarGrid.graded(48, 32.0, 32, "global"))


def test_identity_field_maps_to_identity(exterior_grid):
    disk, n_fill = kelvin_disk_grid(exterior_grid)
    field = kelvin_field(CoefficientField.identity(exterior_grid), disk, n_fill)
    np.testing.assert_allclose(field.a11.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(field.a12.values, 0.0, atol=1e-12)
    np.testing.assert_allclose(field.a22.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(field.b1.values, 0.0, atol=1e-10)
    np.testing.assert_allclose(field.b2.values, 0.0, atol=1e-10)
