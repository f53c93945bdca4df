import numpy as np
import pytest

from app.modules.asymptotics.service import observed_order
from app.modules.grid.polar import (
    PolarGrid,
    cartesian_gradient,
    cartesian_hessian,
    det_hessian,
    divergence_flux,
    flux_divergence,
    fornberg_weights,
    mode_decompose,
    mode_recompose,
)
from app.modules.grid.repository import field_to_frame, read_binary, write_binary


def test_fornberg_weights_second_derivative_uniform():
    w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
    assert w[:, 2] == pytest.approx([1.0, -2.0, 1.0])
    assert w[:, 1] == pytest.approx([-0.5, 0.0, 0.5])


def test_graded_grid_layout(small_grid):
    r = small_grid.radii
    assert r[0] == 0.0
    assert r[-1] == pytest.approx(32.0)
    assert np.any(np.isclose(r, 1.0, atol=1e-12))
    steps = np.diff(r)
    # passo contínuo no joelho: razão entre passos vizinhos próxima de 1
    assert np.max(steps[1:] / steps[:-1]) < 1.2


@pytest.mark.parametrize("n_theta", [24, 48, 16])
def test_grid_rejects_bad_angle_count(n_theta):
    with pytest.raises(ValueError):
        PolarGrid.graded(48, 32.0, n_theta)


def test_grid_rejects_short_truncation():
    with pytest.raises(ValueError):
        PolarGrid.graded(48, 16.0, 32)


def test_restrict_returns_exterior_grid(small_grid):
    exterior, i0 = small_grid.restrict(1.0)
    assert exterior.kind == "exterior"
    assert exterior.r_start == pytest.approx(1.0)
    assert exterior.n_r == small_grid.n_r - i0
    with pytest.raises(ValueError):
        small_grid.restrict(1.234567)


def test_hessian_of_product_is_exact(small_grid):
    h = cartesian_hessian(small_grid.sample(lambda x1, x2: x1 * x2))
    assert np.max(np.abs(h.u12.values - 1.0)) < 1e-7
    assert np.max(np.abs(h.u11.values)) < 1e-7
    assert np.max(np.abs(h.u22.values)) < 1e-7


def test_det_hessian_of_paraboloid(small_grid):
    field = small_grid.sample(lambda x1, x2: 0.5 * (x1**2 + x2**2))
    det = det_hessian(cartesian_hessian(field))
    assert np.max(np.abs(det.values - 1.0)) < 1e-8


def test_gradient_of_linear_function(small_grid):
    g1, g2 = cartesian_gradient(small_grid.sample(lambda x1, x2: 3.0 * x1 - x2))
    assert np.max(np.abs(g1.values - 3.0)) < 1e-9
    assert np.max(np.abs(g2.values + 1.0)) < 1e-9


def test_flux_divergence_matches_determinant(small_grid):
    field = small_grid.sample(lambda x1, x2: 0.5 * x1**2 + 0.25 * x2**2)
    h = cartesian_hessian(field)
    div = flux_divergence(divergence_flux(h))
    inner = small_grid.radii < 8.0
    assert np.max(np.abs(div.values[inner] - det_hessian(h).values[inner])) < 1e-6


def test_integrate_constant_over_disk(small_grid):
    area = small_grid.field(1.0).integrate()
    assert area == pytest.approx(np.pi * 32.0**2, rel=1e-2)


def test_interpolator_is_nan_outside(small_grid):
    evaluate = small_grid.sample(lambda x1, x2: x1 + x2).interpolator()
    assert np.isnan(evaluate(40.0, 0.0))
    assert float(evaluate(2.0, 1.0)) == pytest.approx(3.0, abs=1e-3)


def test_binary_dump_preserves_field(tmp_path, small_grid):
    field = small_grid.sample(lambda x1, x2: np.cos(x1) * x2)
    path = write_binary(field, tmp_path / "campo.bin")
    loaded = read_binary(path)
    assert loaded.grid.kind == "global"
    np.testing.assert_array_equal(loaded.grid.radii, small_grid.radii)
    np.testing.assert_array_equal(loaded.values, field.values)


def test_read_binary_rejects_foreign_file(tmp_path):
    path = tmp_path / "lixo.bin"
    path.write_bytes(b"\x00" * 64)
    with pytest.raises(ValueError):
        read_binary(path)


def test_field_frame_columns(small_grid):
    frame = field_to_frame(small_grid.field(2.0))
    assert list(frame.columns) == ["r", "theta", "value"]
    assert len(frame) == small_grid.n_r * small_grid.n_theta


# ── Invariantes da discretização ───────────────────────────────

def _cubic_perturbation(x1, x2):
    # r²/2 + r³cos(3θ)/100
    return 0.5 * (x1**2 + x2**2) + (x1**3 - 3.0 * x1 * x2**2) / 100.0


def test_mode_round_trip_is_exact(small_grid):
    rng = np.random.default_rng(11)
    values = rng.normal(size=small_grid.shape)
    values[0] = values[0, 0]
    field = small_grid.field(values)
    back = mode_recompose(mode_decompose(field), small_grid)
    np.testing.assert_allclose(back.values, field.values, rtol=0, atol=1e-12)


def test_hessian_commutes_with_grid_rotation(small_grid):
    field = small_grid.sample(_cubic_perturbation)
    rotated = small_grid.field(np.roll(field.values, 1, axis=1))
    h = cartesian_hessian(field)
    h_rot = cartesian_hessian(rotated)

    alpha = 2.0 * np.pi / small_grid.n_theta
    rot = np.array([[np.cos(alpha), -np.sin(alpha)], [np.sin(alpha), np.cos(alpha)]])
    mat = np.stack([np.stack([h.u11.values, h.u12.values], -1), np.stack([h.u12.values, h.u22.values], -1)], -2)
    expected = np.einsum("ij,rtjk,lk->rtil", rot, np.roll(mat, 1, axis=1), rot)

    np.testing.assert_allclose(h_rot.u11.values, expected[..., 0, 0], rtol=0, atol=1e-10)
    np.testing.assert_allclose(h_rot.u12.values, expected[..., 0, 1], rtol=0, atol=1e-10)
    np.testing.assert_allclose(h_rot.u22.values, expected[..., 1, 1], rtol=0, atol=1e-10)


@pytest.mark.parametrize("n_r", [64, 128, 256])
def test_hessian_exact_on_cubic_perturbation(n_r):
    grid = PolarGrid.graded(n_r, 32.0, 32, "global")
    h = cartesian_hessian(grid.sample(_cubic_perturbation))
    x1, x2 = grid.mesh
    assert np.max(np.abs(h.u11.values - (1.0 + 0.06 * x1))) < 1e-9
    assert np.max(np.abs(h.u22.values - (1.0 - 0.06 * x1))) < 1e-9
    assert np.max(np.abs(h.u12.values + 0.06 * x2)) < 1e-9


def test_hessian_radial_order_on_smooth_field():
    def u(x1, x2):
        return np.exp(0.5 * x1) * np.cos(x2)

    steps, errors = [], []
    for n_r in (64, 128, 256):
        grid = PolarGrid.graded(n_r, 32.0, 32, "global")
        h = cartesian_hessian(grid.sample(u))
        x1, x2 = grid.mesh
        # anel dentro do trecho uniforme, longe da origem e do joelho
        ring = (grid.radii >= 0.25) & (grid.radii <= 0.75)
        e = np.exp(0.5 * x1)
        err = max(
            np.max(np.abs(h.u11.values - 0.25 * e * np.cos(x2))[ring]),
            np.max(np.abs(h.u12.values + 0.5 * e * np.sin(x2))[ring]),
            np.max(np.abs(h.u22.values + e * np.cos(x2))[ring]),
        )
        steps.append(grid.radii[1])
        errors.append(err)
    assert errors[-1] < errors[0]
    assert observed_order(np.array(steps), np.array(errors)) >= 3.5


def test_knee_of_graded_grid():
    assert PolarGrid.graded(64, 32.0, 32, "global").knee == pytest.approx(1.0)
    assert PolarGrid.graded(64, 32.0, 32, "global", r0=2.0).knee == pytest.approx(2.0)


def test_uniform_grid_has_no_knee():
    grid = PolarGrid(radii=np.linspace(0.0, 32.0, 65), n_theta=32)
    assert grid.knee is None
