"""
Radial Repository: Persistência do perfil radial
=================================================
CSV com colunas r, ftilde, U, Uprime, Usecond, F1, F2 e um JSON ao lado
com {d, c_d, tail_error}.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd

from app.modules.radial.service import RadialProfile

log = logging.getLogger("ampere2d.radial.repository")

_COLUMNS = ("r", "ftilde", "U", "Uprime", "Usecond", "F1", "F2")


def profile_to_frame(profile: RadialProfile) -> pd.DataFrame:
    return pd.DataFrame({name: getattr(profile, name) for name in _COLUMNS})


def save_profile(profile: RadialProfile, path: str | Path) -> tuple[Path, Path]:
    """
    Grava o perfil e o sidecar JSON.

    Returns:
        (caminho do CSV, caminho do JSON)
    """
    path = Path(path)
    profile_to_frame(profile).to_csv(path, index=False, float_format="%.17g")
    sidecar = path.with_suffix(".json")
    sidecar.write_text(
        json.dumps({"d": profile.d, "c_d": profile.c_d, "tail_error": profile.tail_error}, indent=2, sort_keys=True),
        encoding="utf-8",
    )
    log.info("Perfil radial salvo: %s (+ %s)", path, sidecar.name)
    return path, sidecar
