"""
Core Router: Infraestrutura
==========================
Endpoints de infraestrutura do Ampere2D:
  - GET /builtins    →  Catálogo das fontes embutidas (parâmetros padrão, c0, β)
  - GET /audit-logs  →  Últimas execuções registradas pelo middleware
"""

import math
from typing import Any, List

import numpy as np
from fastapi import APIRouter, HTTPException, Query

from app import schemas
from app.errors import AmpereError, ConfigError
from app.middleware.audit import recent_entries
from app.modules.ingest.source import BUILTIN_SOURCES

router = APIRouter(tags=["Core"])


def to_http(exc: Exception) -> HTTPException:
    """Erros de entrada → 422, falhas numéricas → 500 (detalhe com o tipo do erro)."""
    detail = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        detail["location"] = exc.location
    if isinstance(exc, ValueError):
        return HTTPException(status_code=422, detail=detail)
    if isinstance(exc, AmpereError) and getattr(exc, "history", None):
        detail["history"] = clean_summary(exc.history)
    return HTTPException(status_code=500, detail=detail)


def clean_summary(value: Any) -> Any:
    """Summary serializável em JSON estrito: tipos numpy → Python, NaN/inf → None."""
    if isinstance(value, dict):
        return {str(k): clean_summary(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean_summary(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean_summary(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@router.get("/builtins", response_model=List[schemas.BuiltinSource])
def list_builtins():
    """Retorna as famílias embutidas instanciadas com os parâmetros padrão."""
    catalogue = []
    for name, factory in BUILTIN_SOURCES.items():
        f = factory()
        catalogue.append(schemas.BuiltinSource(name=name, params=dict(f.params), c0=f.c0, beta=f.beta))
    return catalogue


@router.get("/audit-logs")
def list_audit_logs(limit: int = Query(default=50, ge=1, le=500, description="Quantidade de registros")):
    """Retorna os últimos registros de auditoria (mais recente primeiro)."""
    return recent_entries(limit)
