import json
import math

import numpy as np
import pytest

from app.errors import FitWindowError
from app.modules.asymptotics.report_service import AmperePDF, RunReportService
from app.modules.asymptotics.service import (
    default_window,
    fit_expansion,
    observed_order,
    residual_report,
    write_report,
)
from app.modules.ingest.source import AffineData, constant


def _model(d: float, c: float, k: float = 0.0, sigma: float = 2.0):
    def u(x1, x2):
        r = np.hypot(x1, x2)
        return 0.5 * r**2 + d * np.log(r) + c + k * r ** (-sigma)
    return u


def test_default_window():
    assert default_window(64.0) == (8.0, 32.0)


def test_fit_exact_expansion():
    fit = fit_expansion(_model(0.3, 1.5), r_max=64.0)
    assert fit.d_fit == pytest.approx(0.3, abs=1e-10)
    assert fit.c_fit == pytest.approx(1.5, abs=1e-9)
    assert not fit.refined
    assert fit.window == (8.0, 32.0)


def test_fit_refines_with_decaying_remainder():
    fit = fit_expansion(_model(0.3, 1.5, k=2.0), r_max=64.0)
    assert fit.refined
    assert fit.d_fit == pytest.approx(0.3, abs=1e-6)
    assert fit.c_fit == pytest.approx(1.5, abs=1e-5)
    assert fit.sigma_refined == pytest.approx(2.0, abs=1e-3)


def test_fit_without_refinement_reports_decay():
    fit = fit_expansion(_model(0.3, 1.5, k=2.0), r_max=64.0, refine=False)
    assert not fit.refined
    assert abs(fit.d_fit - 0.3) > 1e-6
    assert fit.max_residual > 0


def test_fit_with_affine_data():
    aff = AffineData(A=np.diag([2.0, 0.5]), b=np.array([0.1, -0.2]), c=0.7)

    def u(x1, x2):
        q = 2.0 * x1**2 + 0.5 * x2**2
        return 0.5 * q + 0.1 * x1 - 0.2 * x2 + 0.05 * np.log(np.sqrt(q)) + 0.7

    fit = fit_expansion(u, aff, r_max=64.0)
    assert fit.d_fit == pytest.approx(0.05, abs=1e-10)
    assert fit.c_fit == pytest.approx(0.7, abs=1e-9)


@pytest.mark.parametrize(
    "window, r_max",
    [((10.0, 20.0), None), ((20.0, 10.0), 64.0), ((0.0, 20.0), 64.0)],
)
def test_fit_rejects_bad_windows(window, r_max):
    with pytest.raises(FitWindowError):
        fit_expansion(_model(0.0, 0.0), window=window, r_max=r_max)


def test_fit_requires_window_or_truncation():
    with pytest.raises(FitWindowError):
        fit_expansion(_model(0.0, 0.0))


def test_fit_rejects_nan_evaluations():
    def u(x1, x2):
        return np.where(np.hypot(x1, x2) > 30.0, np.nan, 0.5 * (x1**2 + x2**2))

    with pytest.raises(FitWindowError):
        fit_expansion(u, r_max=64.0)


def test_fit_to_dict_is_json_safe():
    payload = fit_expansion(_model(0.3, 1.5), r_max=64.0).to_dict()
    json.dumps(payload, allow_nan=False)
    assert payload["window"] == [8.0, 32.0]


def test_residual_report_on_paraboloid(small_grid, tmp_path):
    field = small_grid.sample(lambda x1, x2: 0.5 * (x1**2 + x2**2))
    report = residual_report(field, constant(), tol=1e-6)
    assert report.passed
    assert report.max_residual < 1e-8
    assert math.isnan(report.residual[-1])
    csv_path, json_path = write_report(report, tmp_path)
    assert csv_path.exists()
    assert json.loads(json_path.read_text(encoding="utf-8"))["passed"] is True


def test_residual_report_detects_wrong_source(small_grid):
    field = small_grid.sample(lambda x1, x2: 0.5 * (x1**2 + x2**2))
    report = residual_report(field, constant(2.0), tol=1e-6)
    assert not report.passed
    assert report.max_residual == pytest.approx(1.0, abs=1e-8)


def test_observed_order():
    h = np.array([0.1, 0.05, 0.025])
    assert observed_order(h, 3.0 * h**2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        observed_order(h[:1], h[:1])


def test_pdf_report_bytes():
    summary = {"command": "solve-global", "problem": "teste", "d": 0.05, "c_d": 0.1, "levels": 3,
               "converged": True, "fit": {"d_fit": 0.05, "c_fit": 0.1, "sigma_fit": None},
               "residual": {"max_residual": 1e-9, "tol": None, "passed": True}}
    history = [{"l": 0, "sup_psi": 1e-3, "weighted_sup": 2e-3, "residual": 1e-4, "solver_residual": 1e-12}]
    pdf = RunReportService.generate(summary, history, title="teste")
    assert pdf[:4] == b"%PDF"


def test_pdf_page_carries_command_and_problem():
    pdf = AmperePDF(title="disco-unitario", subtitle="Solucao global")
    pdf.set_compression(False)
    pdf.alias_nb_pages()
    pdf.add_page()
    pdf.section_title("Indicadores do ajuste")
    # conteúdo começa abaixo da faixa do cabeçalho
    assert pdf.get_y() > 20
    raw = bytes(pdf.output())
    assert b"Ampere2D" in raw
    assert b"Solucao global" in raw
    assert b"disco-unitario" in raw
    assert b"Indicadores do ajuste" in raw
