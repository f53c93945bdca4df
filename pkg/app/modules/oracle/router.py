"""
Oracle Router: Comparação com o esquema de estêncil largo
==========================================================
  - POST /oracle/compare  →  sup da diferença e tabela por anel
"""

from fastapi import APIRouter

from app import schemas
from app.errors import AmpereError
from app.modules.core.pipeline import run_oracle_compare
from app.modules.core.router import clean_summary, to_http

router = APIRouter(prefix="/oracle", tags=["Oracle"])


@router.post("/compare", response_model=schemas.RunResponse)
def oracle_compare_endpoint(problem: schemas.ProblemConfig):
    try:
        result = run_oracle_compare(problem)
    except (AmpereError, ValueError, RuntimeError) as e:
        raise to_http(e) from e
    summary = {**result.summary, "rings": result.frames["rings"].to_dict(orient="records")}
    return schemas.RunResponse(command=result.command, summary=clean_summary(summary))
