"""
Ingest Router: Validação das hipóteses sobre a fonte
=====================================================
  - POST /validate  →  Relatório amostral de c0, β, ε₀ (+ dados exteriores)
"""

from fastapi import APIRouter, Query

from app import schemas
from app.errors import AmpereError
from app.modules.core.pipeline import run_validate
from app.modules.core.router import clean_summary, to_http

router = APIRouter(prefix="/validate", tags=["Ingest"])


@router.post("", response_model=schemas.ValidationResponse)
def validate_problem(problem: schemas.ProblemConfig, seed: int = Query(default=0, ge=0)):
    """Valida a fonte do problema; reprovação não é erro HTTP (passed=False)."""
    try:
        result = run_validate(problem, seed=seed)
    except (AmpereError, ValueError) as e:
        raise to_http(e) from e
    return schemas.ValidationResponse(passed=result.summary["passed"], report=clean_summary(result.summary["report"]))
