"""
cli.py: Linha de comando do Ampere2D

Uso:
    python -m app.cli solve-global   --config problema.toml --out runs/constante
    python -m app.cli solve-exterior --config exterior.json --out runs/ext --nr 384
    python -m app.cli validate       --config problema.toml --out runs/val --seed 7
    python -m app.cli probe-green    --config problema.toml --out runs/green
    python -m app.cli oracle-compare --config problema.toml --out runs/oraculo
    python -m app.cli report         --config problema.toml --out runs/relatorio

Cada execução cria o diretório de saída (que não pode existir) de forma
atômica: os artefatos são gravados num diretório temporário irmão e
renomeados ao final. Em caso de erro o diretório ainda é criado, com
error.json no lugar dos artefatos.

Códigos de saída:
  0 → sucesso
  1 → configuração malformada
  2 → falha de validação
  3 → não convergência / falha numérica / resíduo acima da tolerância
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
import scipy

from app import __version__
from app.config import get_settings
from app.errors import AmpereError, ConfigError
from app.modules.core.pipeline import COMMANDS, RunResult
from app.modules.grid.repository import write_binary, write_csv
from app.modules.radial.repository import save_profile
from app.schemas import ProblemConfig, load_problem

log = logging.getLogger("ampere2d.cli")

_EXIT_CONFIG = 1
_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3


# ────────────────────────────────────────────────────────────────
# ARGUMENTOS
# ────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampere2d", description="Solver construtivo de det(D²u) = f em ℝ².")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="Arquivo de problema (JSON ou TOML)")
        p.add_argument("--out", default=None,
                       help="Diretório de saída (não pode existir; padrão <output_dir>/<comando>-<config>)")
        p.add_argument("--nr", type=int, default=None, help="Sobrescreve grid.n_r")
        p.add_argument("--ntheta", type=int, default=None, help="Sobrescreve grid.n_theta")
        p.add_argument("--rmax", type=float, default=None, help="Sobrescreve grid.r_max")
        p.add_argument("--tol", type=float, default=None, help="Sobrescreve solver.tol")
        p.add_argument("--seed", type=int, default=0, help="Semente das checagens aleatórias")
        if name == "probe-green":
            p.add_argument("--x", type=float, nargs=2, default=None, metavar=("X1", "X2"), help="Ponto fonte")
    return parser


def apply_overrides(cfg: ProblemConfig, args: argparse.Namespace) -> tuple[ProblemConfig, dict[str, Any]]:
    """Aplica --nr/--ntheta/--rmax/--tol sobre o arquivo; devolve também o que foi sobrescrito."""
    grid_update = {k: v for k, v in (("n_r", args.nr), ("n_theta", args.ntheta), ("r_max", args.rmax))
                   if v is not None}
    solver_update = {"tol": args.tol} if args.tol is not None else {}
    data = cfg.model_dump()
    data["grid"].update(grid_update)
    data["solver"].update(solver_update)
    try:
        updated = ProblemConfig.model_validate(data)
    except ValueError as e:
        raise ConfigError(str(e), location="argumentos") from e
    overrides = {**{f"grid.{k}": v for k, v in grid_update.items()},
                 **{f"solver.{k}": v for k, v in solver_update.items()}}
    return updated, overrides


# ────────────────────────────────────────────────────────────────
# ARTEFATOS
# ────────────────────────────────────────────────────────────────

def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"tipo não serializável: {type(value).__name__}")


def _dump(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default, allow_nan=True),
                    encoding="utf-8")


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command: str, config_path: str, args: argparse.Namespace, overrides: dict) -> dict:
    return {
        "command": command,
        "config": str(config_path),
        "config_sha256": _sha256(config_path) if Path(config_path).is_file() else None,
        "overrides": overrides,
        "seed": args.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "versions": {
            "ampere2d": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    """summary.json (determinístico), tabelas CSV, campos (.bin + .csv), perfil e documentos."""
    _dump(out_dir / "summary.json", result.summary)
    for name, frame in result.frames.items():
        frame.to_csv(out_dir / f"{name}.csv", index=False, float_format="%.17g")
    for name, polar in result.fields.items():
        write_binary(polar, out_dir / f"{name}.bin")
        write_csv(polar, out_dir / f"{name}.csv")
    if result.profile is not None:
        save_profile(result.profile, out_dir / "profile.csv")
    for name, blob in result.documents.items():
        (out_dir / name).write_bytes(blob)


def _error_payload(exc: BaseException, code: int) -> dict:
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
        "location": getattr(exc, "location", None),
        "history": getattr(exc, "history", None),
        "traceback": traceback.format_exception_only(type(exc), exc)[-1].strip(),
    }


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, AmpereError):
        return exc.exit_code
    if isinstance(exc, ValueError):
        return _EXIT_VALIDATION
    return _EXIT_NUMERICAL


# ────────────────────────────────────────────────────────────────
# EXECUÇÃO
# ────────────────────────────────────────────────────────────────

def execute(args: argparse.Namespace) -> int:
    default_out = Path(get_settings().output_dir) / f"{args.command}-{Path(args.config).stem}"
    out_dir = Path(args.out) if args.out else default_out
    if out_dir.exists():
        log.error("Diretório de saída já existe: %s", out_dir)
        return _EXIT_CONFIG
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))

    overrides: dict = {}
    code = 0
    try:
        try:
            cfg, overrides = apply_overrides(load_problem(args.config), args)
            runner = COMMANDS[args.command]
            if args.command == "validate":
                result = runner(cfg, seed=args.seed)
            elif args.command == "probe-green":
                result = runner(cfg, tuple(args.x) if args.x else None)
            else:
                result = runner(cfg)
            write_artifacts(result, staging)
            code = result.exit_code
            if code:
                log.warning("%s concluído com código %d", args.command, code)
            else:
                log.info("%s concluído: %s", args.command, out_dir)
        except (AmpereError, ValueError, RuntimeError, np.linalg.LinAlgError) as e:
            code = exit_code_for(e)
            log.error("%s falhou (%s): %s", args.command, type(e).__name__, e)
            _dump(staging / "error.json", _error_payload(e, code))
        _dump(staging / "manifest.json", build_manifest(args.command, args.config, args, overrides))
        os.replace(staging, out_dir)
    finally:
        if staging.exists():
            shutil.rmtree(staging, ignore_errors=True)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
