"""
Persistência de campos polares: CSV (r, theta, value) e dump binário.

Formato binário (little-endian):
  cabeçalho de 32 bytes = magic (8s) | n_r (u32) | n_theta (u32) | kind (u32) | 12 bytes reservados
  seguido de n_r raios float64 e dos valores float64 em ordem row-major (n_r × n_theta).
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np
import pandas as pd

from app.modules.grid.polar import PolarField, PolarGrid

log = logging.getLogger("ampere2d.grid.repository")

_MAGIC = b"AMP2DFLD"
_HEADER = struct.Struct("<8sIII12x")
_KIND_CODES = {"global": 0, "exterior": 1, "disk": 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def field_to_frame(field: PolarField) -> pd.DataFrame:
    grid = field.grid
    r, th = np.meshgrid(grid.radii, grid.theta, indexing="ij")
    return pd.DataFrame({"r": r.ravel(), "theta": th.ravel(), "value": field.values.ravel()})


def write_csv(field: PolarField, path: str | Path) -> Path:
    path = Path(path)
    field_to_frame(field).to_csv(path, index=False, float_format="%.17g")
    log.info("Campo salvo em CSV: %s (%d×%d)", path, *field.grid.shape)
    return path


def write_binary(field: PolarField, path: str | Path) -> Path:
    path = Path(path)
    grid = field.grid
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, grid.n_r, grid.n_theta, _KIND_CODES[grid.kind]))
        fh.write(np.ascontiguousarray(grid.radii, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    log.info("Campo salvo em binário: %s", path)
    return path


def read_binary(path: str | Path) -> PolarField:
    raw = Path(path).read_bytes()
    magic, n_r, n_theta, kind = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValueError(f"Arquivo {path} não é um dump de campo Ampere2D.")
    offset = _HEADER.size
    radii = np.frombuffer(raw, dtype="<f8", count=n_r, offset=offset)
    offset += 8 * n_r
    values = np.frombuffer(raw, dtype="<f8", count=n_r * n_theta, offset=offset).reshape(n_r, n_theta)
    grid = PolarGrid(radii=radii.copy(), n_theta=n_theta, kind=_KIND_NAMES[kind])
    return PolarField(values=values.copy(), grid=grid)
