"""
Audit Middleware: Registra cada execução de solver disparada pela API.

Intercepta requisições POST nas rotas de cálculo, armazenando num buffer em
memória (consultado em GET /audit-logs):
- O quê (método, path, nome do problema)
- Quando (timestamp UTC)
- Resultado (status code, duração)
"""

import json
import logging
import time
from collections import deque
from datetime import datetime, timezone
from threading import Lock

from starlette.middleware.base import BaseHTTPMiddleware
from starlette.requests import Request
from starlette.responses import Response

log = logging.getLogger("ampere2d.audit")

# Métodos que disparam cálculo
_WRITE_METHODS = {"POST"}

# Paths que NÃO devem ser auditados
_SKIP_PATHS = {"/", "/docs", "/openapi.json", "/redoc"}

_MAX_ENTRIES = 500

_entries: deque[dict] = deque(maxlen=_MAX_ENTRIES)
_lock = Lock()


def recent_entries(limit: int = 50) -> list[dict]:
    """Últimos ``limit`` registros, mais recente primeiro."""
    with _lock:
        return list(reversed(_entries))[:limit]


def clear_entries() -> None:
    with _lock:
        _entries.clear()


class AuditMiddleware(BaseHTTPMiddleware):
    """
    Middleware que mede a duração de cada requisição de cálculo e grava um
    registro no buffer de auditoria.
    """

    async def dispatch(self, request: Request, call_next) -> Response:
        if request.method not in _WRITE_METHODS or request.url.path in _SKIP_PATHS:
            return await call_next(request)

        problem = None
        try:
            body_bytes = await request.body()
            if body_bytes:
                body = json.loads(body_bytes.decode("utf-8", errors="replace"))
                if isinstance(body, dict):
                    problem = body.get("name") or (body.get("problem") or {}).get("name")
        except (json.JSONDecodeError, ValueError, AttributeError):
            pass

        start = time.perf_counter()
        response = await call_next(request)
        duration_ms = int((time.perf_counter() - start) * 1000)

        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "method": request.method,
            "path": request.url.path,
            "problem": problem,
            "status_code": response.status_code,
            "duration_ms": duration_ms,
        }
        with _lock:
            _entries.append(entry)
        log.info("%s %s [%s] → %d em %dms", request.method, request.url.path, problem, response.status_code,
                 duration_ms)
        return response
