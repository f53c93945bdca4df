import numpy as np
import pytest

from app.errors import ExtensionInfeasibleError, ValidationFailedError
from app.modules.exterior.service import decay_slopes, extend_source, solve_exterior, uniqueness_check
from app.modules.grid.polar import PolarGrid
from app.modules.ingest.service import annulus_mass
from app.modules.ingest.source import BoundaryData, ExteriorSpec, constant, rational


@pytest.fixture
def grid():
    return PolarGrid.graded(96, 32.0, 32, "global", r0=1.0)


def _radial_reference(r):
    # U′ = √(r² + 1), U(1) = ½
    def primitive(s):
        return 0.5 * (s * np.sqrt(s * s + 1.0) + np.arcsinh(s))

    return 0.5 + primitive(r) - primitive(1.0)


@pytest.mark.parametrize("profile, gamma", [("cubic", 2.4), ("quartic", 3.0)])
def test_extension_mass(profile, gamma):
    f_ext = extend_source(constant(), 1.0, 0.3, profile=profile)
    assert f_ext.params["gamma"] == pytest.approx(gamma, rel=1e-8)
    assert f_ext.params["mass"] == pytest.approx(0.3, rel=1e-10)
    assert annulus_mass(f_ext, 0.0, 1.0) == pytest.approx(0.3, rel=1e-6)
    # fora do disco a fonte não muda
    assert f_ext(np.array([1.5]), np.array([0.0]))[0] == pytest.approx(1.0)


def test_extension_keeps_outer_source():
    f = rational(0.1)
    f_ext = extend_source(f, 2.0, 0.5)
    x1, x2 = np.array([2.5, 0.0, -7.0]), np.array([0.0, 3.0, 1.0])
    np.testing.assert_allclose(f_ext(x1, x2), f(x1, x2), rtol=1e-14)
    assert f_ext.params["f_ext_min"] > 0


def test_extension_infeasible():
    with pytest.raises(ExtensionInfeasibleError):
        extend_source(constant(), 1.0, -0.2)


def test_unknown_profile():
    with pytest.raises(ValueError):
        extend_source(constant(), 1.0, 0.3, profile="gaussian")


def test_radial_exterior_problem(grid):
    spec = ExteriorSpec(r0=1.0, boundary_data=BoundaryData.radial(1.0), d_target=0.5)
    sol = solve_exterior(spec, constant(), grid, 1e-10)
    assert sol.grid.kind == "exterior"
    assert sol.grid.r_start == pytest.approx(1.0)
    keep = sol.grid.radii <= 16.0
    ref = _radial_reference(sol.grid.radii[keep])[:, None]
    np.testing.assert_allclose(sol.u.values[keep], np.broadcast_to(ref, sol.u.values[keep].shape), atol=1e-6)
    assert sol.fit.d_fit == pytest.approx(0.5, abs=1e-3)
    assert sol.state.boundary_error <= 1e-9
    assert sol.offset.sup < 1e-8
    summary = sol.summary()
    assert summary["d_target"] == 0.5
    assert summary["profile"] == "cubic"
    assert set(summary["psi0_decay"]) == {"m0", "m1", "m2"}


def test_uniqueness_across_extensions(grid):
    spec = ExteriorSpec(r0=1.0, boundary_data=BoundaryData.harmonic(0.5, [(0.01, 2, 0.0)]), d_target=0.5)
    report = uniqueness_check(spec, constant(), grid, 1e-10)
    assert report["profiles"] == ["cubic", "quartic"]
    assert report["gamma"][0] != report["gamma"][1]
    assert report["sup_difference"] <= 1e-7


def test_inadmissible_mass(grid):
    spec = ExteriorSpec(r0=1.0, boundary_data=BoundaryData.radial(1.0), d_target=-0.6)
    with pytest.raises(ValidationFailedError) as info:
        solve_exterior(spec, constant(), grid)
    assert [v.check for v in info.value.report] == ["admissibility"]


def test_r0_must_be_a_node(grid):
    spec = ExteriorSpec(r0=1.2345, boundary_data=BoundaryData.radial(1.2345), d_target=0.5)
    with pytest.raises(ValueError):
        solve_exterior(spec, constant(), grid)


def test_decay_slopes_of_inverse_power():
    grid = PolarGrid.graded(64, 32.0, 32, "exterior", r0=1.0)
    psi = grid.sample(lambda x1, x2: x1 / (x1**2 + x2**2))
    slopes = decay_slopes(psi, (4.0, 16.0))
    assert slopes["m0"] == pytest.approx(-1.0, abs=0.05)
    assert slopes["m1"] == pytest.approx(-2.0, abs=0.1)
    assert slopes["m2"] == pytest.approx(-3.0, abs=0.2)
