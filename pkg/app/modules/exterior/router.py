"""
Exterior Router: Problema de Dirichlet exterior
================================================
  - POST /solve/exterior  →  Summary (d_fit, c_d, erro de contorno, cascata)
"""

from fastapi import APIRouter, HTTPException

from app import schemas
from app.errors import AmpereError
from app.modules.core.pipeline import run_solve_exterior
from app.modules.core.router import clean_summary, to_http

router = APIRouter(prefix="/solve", tags=["Solver"])


@router.post("/exterior", response_model=schemas.RunResponse)
def solve_exterior_endpoint(problem: schemas.ProblemConfig):
    if problem.exterior is None:
        raise HTTPException(status_code=422, detail="Problema sem seção exterior")
    try:
        result = run_solve_exterior(problem)
    except (AmpereError, ValueError, RuntimeError) as e:
        raise to_http(e) from e
    return schemas.RunResponse(command=result.command, summary=clean_summary(result.summary))
