import json

import numpy as np
import pytest

from app.cli import build_parser, main
from app.modules.grid.repository import read_binary


def _run(*argv) -> int:
    return main([str(a) for a in argv])


def test_solve_global_writes_artifacts(tmp_path, small_problem, write_problem):
    cfg = write_problem(small_problem)
    out = tmp_path / "run"
    assert _run("solve-global", "--config", cfg, "--out", out) == 0
    for name in ("summary.json", "manifest.json", "v.bin", "v.csv", "profile.csv", "history.csv", "residual.csv"):
        assert (out / name).is_file(), name
    summary = json.loads((out / "summary.json").read_text())
    assert summary["command"] == "solve-global"
    assert summary["converged"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve-global"
    assert len(manifest["config_sha256"]) == 64
    v = read_binary(out / "v.bin")
    x1, x2 = v.grid.mesh
    np.testing.assert_allclose(v.values, 0.5 * (x1**2 + x2**2), atol=1e-9)


def test_overrides_are_recorded(tmp_path, small_problem, write_problem):
    cfg = write_problem({**small_problem, "grid": {"n_r": 256}})
    out = tmp_path / "run"
    assert _run("solve-global", "--config", cfg, "--out", out, "--nr", 48, "--ntheta", 32, "--rmax", 32) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["overrides"] == {"grid.n_r": 48, "grid.n_theta": 32, "grid.r_max": 32.0}
    assert json.loads((out / "summary.json").read_text())["n_r"] == 48


def test_summary_is_deterministic(tmp_path, small_problem, write_problem):
    cfg = write_problem(small_problem)
    assert _run("solve-global", "--config", cfg, "--out", tmp_path / "a") == 0
    assert _run("solve-global", "--config", cfg, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_existing_output_directory(tmp_path, small_problem, write_problem):
    cfg = write_problem(small_problem)
    out = tmp_path / "existe"
    out.mkdir()
    assert _run("solve-global", "--config", cfg, "--out", out) == 1
    assert list(out.iterdir()) == []


def test_malformed_config(tmp_path):
    cfg = tmp_path / "ruim.json"
    cfg.write_text("{ não é json", encoding="utf-8")
    out = tmp_path / "run"
    assert _run("solve-global", "--config", cfg, "--out", out) == 1
    error = json.loads((out / "error.json").read_text())
    assert error["error"] == "ConfigError"
    assert error["location"].startswith(f"{cfg}:1:")
    assert (out / "manifest.json").is_file()
    assert not (out / "summary.json").exists()


def test_invalid_override(tmp_path, small_problem, write_problem):
    cfg = write_problem(small_problem)
    out = tmp_path / "run"
    assert _run("solve-global", "--config", cfg, "--out", out, "--ntheta", 8) == 1
    assert json.loads((out / "error.json").read_text())["location"] == "argumentos"


def test_validate_failure_exit_code(tmp_path, small_problem, write_problem):
    problem = {**small_problem, "source": {"family": "rational", "params": {"epsilon": 0.1, "beta": 1.5}}}
    out = tmp_path / "val"
    assert _run("validate", "--config", write_problem(problem), "--out", out, "--seed", 7) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is False
    assert summary["report"]["random_checks"]["seed"] == 7


def test_validate_success(tmp_path, small_problem, write_problem):
    out = tmp_path / "val"
    assert _run("validate", "--config", write_problem(small_problem), "--out", out) == 0
    assert json.loads((out / "summary.json").read_text())["passed"] is True


def test_report_writes_pdf(tmp_path, small_problem, write_problem):
    out = tmp_path / "rel"
    assert _run("report", "--config", write_problem(small_problem), "--out", out) == 0
    assert (out / "report.pdf").read_bytes().startswith(b"%PDF")
    assert json.loads((out / "summary.json").read_text())["solved"] == "solve-global"


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_default_output_directory(tmp_path, monkeypatch, small_problem, write_problem):
    from app.config import get_settings

    monkeypatch.setenv("AMPERE2D_OUTPUT_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    try:
        cfg = write_problem(small_problem, name="constante.json")
        assert _run("validate", "--config", cfg) == 0
        assert (tmp_path / "runs" / "validate-constante" / "summary.json").is_file()
    finally:
        get_settings.cache_clear()
