import pytest

from app.errors import ConfigError
from app.modules.core.pipeline import build_affine, build_exterior_spec, build_grid, build_source
from app.schemas import ProblemConfig, SourceFamily, load_problem, parse_problem


def test_defaults():
    cfg = parse_problem({})
    assert cfg.source.family == SourceFamily.constant
    assert cfg.grid.n_r == 256
    assert cfg.solver.tol == 1e-10
    assert cfg.exterior is None


def test_field_error_carries_path():
    with pytest.raises(ConfigError) as info:
        parse_problem({"grid": {"n_theta": 8}}, origin="p.json")
    assert info.value.location == "p.json:grid.n_theta"
    assert info.value.exit_code == 1


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as info:
        parse_problem({"solver": {"tolerance": 1e-8}})
    assert "solver.tolerance" in info.value.location


def test_tabulated_requires_path():
    with pytest.raises(ConfigError):
        parse_problem({"source": {"family": "tabulated"}})


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "ruim.json"
    path.write_text('{\n  "name": "x",\n  "grid": {\n}', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_problem(path)
    assert info.value.location.startswith(f"{path}:4:")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_problem(tmp_path / "nada.json")


def test_toml_problem(tmp_path):
    path = tmp_path / "problema.toml"
    path.write_text(
        'name = "toml"\n'
        "[source]\nfamily = \"rational\"\nparams = { epsilon = 0.2 }\n"
        "[grid]\nn_r = 64\nr_max = 32.0\n"
        "[exterior]\nr0 = 1.0\nd_target = 0.5\n"
        "[exterior.boundary]\nkind = \"harmonic\"\noffset = 0.5\n"
        "terms = [{ amplitude = 0.01, k = 2 }]\n",
        encoding="utf-8",
    )
    cfg = load_problem(path)
    assert cfg.name == "toml"
    assert cfg.source.params == {"epsilon": 0.2}
    assert cfg.exterior.boundary.terms[0].k == 2


def test_builders(small_problem):
    cfg = ProblemConfig.model_validate({**small_problem, "source": {"family": "angular", "params": {"k": 3}}})
    f = build_source(cfg.source)
    assert f.name == "angular"
    assert f.params["k"] == 3
    assert build_affine(cfg).is_identity
    grid = build_grid(cfg)
    assert grid.n_r == 48 and grid.r_max == 32.0
    refined = build_grid(cfg, refined=True)
    assert refined.n_r == 95 and refined.n_theta == 64


def test_builders_wrap_domain_errors(small_problem):
    cfg = ProblemConfig.model_validate({**small_problem, "affine": {"A": [[2.0, 0.0], [0.0, 2.0]]}})
    with pytest.raises(ConfigError) as info:
        build_affine(cfg)
    assert info.value.location == "affine"

    cfg = ProblemConfig.model_validate({**small_problem, "source": {"family": "rational", "params": {"x": 1.0}}})
    with pytest.raises(ConfigError) as info:
        build_source(cfg.source)
    assert info.value.location == "source.params"

    with pytest.raises(ConfigError):
        build_exterior_spec(ProblemConfig.model_validate(small_problem))
