"""
Fixtures compartilhadas: grades pequenas (R_max = 32, n_θ = 32) para que a
suíte inteira rode em segundos.
"""

import json

import pytest

from app.modules.grid.polar import PolarGrid


@pytest.fixture
def small_grid() -> PolarGrid:
    return PolarGrid.graded(48, 32.0, 32, "global")


@pytest.fixture
def medium_grid() -> PolarGrid:
    return PolarGrid.graded(96, 32.0, 32, "global")


@pytest.fixture
def small_problem() -> dict:
    """Problema mínimo aceito pelo ProblemConfig."""
    return {
        "name": "teste",
        "source": {"family": "constant"},
        "grid": {"n_r": 48, "n_theta": 32, "r_max": 32.0},
    }


@pytest.fixture
def write_problem(tmp_path):
    """Grava um dicionário como arquivo de problema JSON e devolve o caminho."""

    def _write(data: dict, name: str = "problema.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write
