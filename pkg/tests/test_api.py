import math

import numpy as np
import pytest
from fastapi import HTTPException
from fastapi.testclient import TestClient

from app.errors import ConfigError, NonConvergenceError
from app.middleware.audit import clear_entries, recent_entries
from app.modules.core.router import clean_summary, to_http
from app.modules.exterior.router import solve_exterior_endpoint
from app.schemas import ProblemConfig
from main import app


@pytest.fixture
def client():
    clear_entries()
    with TestClient(app) as c:
        yield c
    clear_entries()


def test_health(client):
    body = client.get("/").json()
    assert body["status"] == "running"


def test_builtins_catalogue(client):
    names = {item["name"] for item in client.get("/builtins").json()}
    assert {"constant", "rational", "angular", "odd"} <= names


def test_solve_global_is_audited(client, small_problem):
    response = client.post("/solve/global", json=small_problem)
    assert response.status_code == 200
    body = response.json()
    assert body["command"] == "solve-global"
    assert body["summary"]["converged"] is True

    logs = client.get("/audit-logs").json()
    assert logs[0]["path"] == "/solve/global"
    assert logs[0]["problem"] == "teste"
    assert logs[0]["status_code"] == 200
    # GET não é auditado
    assert len(recent_entries()) == 1


def test_invalid_problem_is_422(client, small_problem):
    response = client.post("/solve/global", json={**small_problem, "grid": {"n_theta": 48}})
    assert response.status_code == 422


def test_validate_endpoint(client, small_problem):
    problem = {**small_problem, "source": {"family": "rational", "params": {"beta": 1.5}}}
    response = client.post("/validate", json=problem, params={"seed": 3})
    assert response.status_code == 200
    assert response.json()["passed"] is False


def test_report_endpoint_returns_pdf(client, small_problem):
    response = client.post("/report", json=small_problem)
    assert response.status_code == 200
    assert response.headers["content-type"] == "application/pdf"
    assert response.content.startswith(b"%PDF")


def test_exterior_endpoint_requires_section(small_problem):
    with pytest.raises(HTTPException) as info:
        solve_exterior_endpoint(ProblemConfig.model_validate(small_problem))
    assert info.value.status_code == 422


def test_error_mapping():
    bad = to_http(ConfigError("campo inválido", location="grid.n_r"))
    assert bad.status_code == 422
    assert bad.detail["location"] == "grid.n_r"

    failed = to_http(NonConvergenceError("sem convergência", [{"l": 0, "sup_psi": math.nan}]))
    assert failed.status_code == 500
    assert failed.detail["history"] == [{"l": 0, "sup_psi": None}]


def test_clean_summary():
    cleaned = clean_summary({"a": np.float64(1.5), "b": [math.inf, np.int64(2)], "c": np.array([0.5, math.nan])})
    assert cleaned == {"a": 1.5, "b": [None, 2], "c": [0.5, None]}
    assert type(cleaned["b"][1]) is int
