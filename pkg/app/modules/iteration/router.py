"""
Iteration Router: Solução global e relatório
=============================================
  - POST /solve/global  →  Summary da solução em ℝ²
  - POST /report        →  PDF executivo da execução (global ou exterior)
"""

from fastapi import APIRouter
from fastapi.responses import Response

from app import schemas
from app.errors import AmpereError
from app.modules.core.pipeline import run_report, run_solve_global
from app.modules.core.router import clean_summary, to_http

router = APIRouter(tags=["Solver"])


@router.post("/solve/global", response_model=schemas.RunResponse)
def solve_global_endpoint(problem: schemas.ProblemConfig):
    try:
        result = run_solve_global(problem)
    except (AmpereError, ValueError, RuntimeError) as e:
        raise to_http(e) from e
    return schemas.RunResponse(command=result.command, summary=clean_summary(result.summary))


@router.post("/report")
def report_endpoint(problem: schemas.ProblemConfig):
    """Executa o solve e devolve o resumo em PDF."""
    try:
        result = run_report(problem)
    except (AmpereError, ValueError, RuntimeError) as e:
        raise to_http(e) from e
    return Response(
        content=result.documents["report.pdf"],
        media_type="application/pdf",
        headers={"Content-Disposition": f"attachment; filename=relatorio_{problem.name}.pdf"},
    )
