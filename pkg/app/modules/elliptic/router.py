"""
Elliptic Router: Sonda da função de Green
==========================================
  - POST /green/probe  →  c₂ e cota do gradiente ajustados em x
"""

from fastapi import APIRouter

from app import schemas
from app.errors import AmpereError
from app.modules.core.pipeline import run_probe_green
from app.modules.core.router import clean_summary, to_http

router = APIRouter(prefix="/green", tags=["Elliptic"])


@router.post("/probe", response_model=schemas.RunResponse)
def probe_green_endpoint(request: schemas.GreenRequest):
    try:
        result = run_probe_green(request.problem, request.x)
    except (AmpereError, ValueError, RuntimeError) as e:
        raise to_http(e) from e
    return schemas.RunResponse(command=result.command, summary=clean_summary(result.summary))
