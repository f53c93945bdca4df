"""
Ampere2D: API de cálculo (Modular)

Entry point da aplicação FastAPI.
Toda lógica de rotas está em app/modules/<domain>/router.py.
Este arquivo apenas:
  1. Configura logging e CORS
  2. Registra os routers
  3. Adiciona o middleware de auditoria
"""

import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app import __version__, schemas
from app.config import get_settings

# ── Routers modulares ────────────────────────────────────────────
from app.modules.core.router import router as core_router
from app.modules.ingest.router import router as ingest_router
from app.modules.iteration.router import router as iteration_router
from app.modules.exterior.router import router as exterior_router
from app.modules.elliptic.router import router as elliptic_router
from app.modules.oracle.router import router as oracle_router

# ── Middleware de auditoria ──────────────────────────────────────
from app.middleware.audit import AuditMiddleware

logging.basicConfig(
    level=getattr(logging, get_settings().log_level.upper(), logging.INFO),
    format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
)

# ============================================
# APP FASTAPI
# ============================================
app = FastAPI(
    title="Ampere2D - API",
    description="Solver construtivo de det(D²u) = f em ℝ² (global, exterior, Green, oráculo)",
    version=__version__,
)

# ── CORS ─────────────────────────────────────────────────────
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # Em produção, especifique os domínios
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# ── Audit Middleware ───────────────────────────────────────────
app.add_middleware(AuditMiddleware)


# ── Health-check ─────────────────────────────────────────────
@app.get("/", response_model=schemas.HealthResponse)
def health_check():
    return schemas.HealthResponse(status="running", version=__version__)


# ── Registro dos Routers ───────────────────────────────────────
app.include_router(core_router)        # /builtins, /audit-logs
app.include_router(ingest_router)      # /validate
app.include_router(iteration_router)   # /solve/global, /report
app.include_router(exterior_router)    # /solve/exterior
app.include_router(elliptic_router)    # /green/probe
app.include_router(oracle_router)      # /oracle/compare
