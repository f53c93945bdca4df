"""
Pydantic Schemas do Ampere2D
Arquivo de problema (JSON/TOML) e modelos de entrada/saída da API
"""
from __future__ import annotations

import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigError


# ============================================
# SCHEMAS: FONTE E DADOS AFINS
# ============================================

class SourceFamily(str, Enum):
    """Famílias de fonte embutidas"""
    constant = "constant"
    rational = "rational"
    gaussian = "gaussian"
    anisotropic = "anisotropic"
    angular = "angular"
    odd = "odd"
    tabulated = "tabulated"  # CSV x1,x2,f


class SourceConfig(BaseModel):
    """Fonte f: família embutida com parâmetros ou tabela CSV"""
    model_config = ConfigDict(extra="forbid")

    family: SourceFamily = SourceFamily.constant
    params: dict[str, float] = Field(default_factory=dict)
    path: Optional[str] = None
    c0: Optional[float] = Field(default=None, gt=0)
    beta: Optional[float] = None

    @model_validator(mode="after")
    def _tabulated_needs_path(self) -> "SourceConfig":
        if self.family == SourceFamily.tabulated and (self.path is None or self.c0 is None or self.beta is None):
            raise ValueError("fonte tabulated exige path, c0 e beta")
        return self


class AffineConfig(BaseModel):
    """Dados afins (A, b, c); det A = 1 é verificado na construção"""
    model_config = ConfigDict(extra="forbid")

    A: list[list[float]] = Field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0]])
    b: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    c: float = 0.0

    @model_validator(mode="after")
    def _shapes(self) -> "AffineConfig":
        if len(self.A) != 2 or any(len(row) != 2 for row in self.A):
            raise ValueError("A deve ser 2×2")
        if len(self.b) != 2:
            raise ValueError("b deve ter 2 componentes")
        return self


# ============================================
# SCHEMAS: DISCRETIZAÇÃO E SOLVER
# ============================================

class GridConfig(BaseModel):
    """Grade polar graduada"""
    model_config = ConfigDict(extra="forbid")

    n_r: int = Field(default=256, ge=16)
    n_theta: int = Field(default=64, ge=32)
    r_max: float = Field(default=64.0, gt=0)
    knee: float = Field(default=1.0, gt=0)  # fim do trecho uniforme (r₀ no problema exterior)


class SolverConfig(BaseModel):
    """Tolerâncias e opções da iteração"""
    model_config = ConfigDict(extra="forbid")

    tol: float = Field(default=1e-10, gt=0)
    l_max: int = Field(default=40, ge=1)
    tau: Optional[float] = Field(default=None, gt=0)
    far_field: Literal["dirichlet", "robin"] = "dirichlet"
    fit_window: Optional[tuple[float, float]] = None
    residual_tol: Optional[float] = Field(default=None, gt=0)


class ValidationConfig(BaseModel):
    """Plano de amostragem da validação"""
    model_config = ConfigDict(extra="forbid")

    r_max: float = Field(default=64.0, gt=0)
    r_min: float = Field(default=1.0 / 16.0, gt=0)
    n_theta: int = Field(default=64, ge=16)
    points_per_octave: int = Field(default=4, ge=1)
    eps0_threshold: Optional[float] = Field(default=None, gt=0)


# ============================================
# SCHEMAS: PROBLEMA EXTERIOR
# ============================================

class HarmonicTerm(BaseModel):
    """amplitude·cos(k·θ + phase)"""
    model_config = ConfigDict(extra="forbid")

    amplitude: float
    k: int = Field(ge=0)
    phase: float = 0.0


class BoundaryConfig(BaseModel):
    """Dado de Dirichlet φ(θ) em ∂B_{r₀}"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["harmonic", "radial", "csv"] = "radial"
    offset: float = 0.0
    terms: list[HarmonicTerm] = Field(default_factory=list)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _csv_needs_path(self) -> "BoundaryConfig":
        if self.kind == "csv" and self.path is None:
            raise ValueError("contorno csv exige path")
        return self


class ExteriorConfig(BaseModel):
    """Problema exterior (r₀, φ, d, α)"""
    model_config = ConfigDict(extra="forbid")

    r0: float = Field(default=1.0, gt=0)
    d_target: float = 0.0
    alpha: float = Field(default=0.5, gt=0, lt=1)
    boundary: BoundaryConfig = Field(default_factory=BoundaryConfig)
    profile: Literal["cubic", "quartic"] = "cubic"
    uniqueness: bool = False


class OracleConfig(BaseModel):
    """Oráculo de estêncil largo"""
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(default=4.0, gt=0)
    n: int = Field(default=129, ge=9)
    width: int = Field(default=2, ge=1, le=3)
    tol: float = Field(default=1e-10, gt=0)
    n_rings: int = Field(default=8, ge=1)
    acceptance_tol: float = Field(default=5e-3, gt=0)


class GreenConfig(BaseModel):
    """Sonda da função de Green"""
    model_config = ConfigDict(extra="forbid")

    x: tuple[float, float] = (4.0, 0.0)
    refine: bool = True


class ProblemConfig(BaseModel):
    """Arquivo de problema completo"""
    model_config = ConfigDict(extra="forbid")

    name: str = "problema"
    source: SourceConfig = Field(default_factory=SourceConfig)
    affine: AffineConfig = Field(default_factory=AffineConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    validation: ValidationConfig = Field(default_factory=ValidationConfig)
    exterior: Optional[ExteriorConfig] = None
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    green: GreenConfig = Field(default_factory=GreenConfig)


def _field_path(loc: tuple) -> str:
    return ".".join(str(p) for p in loc) or "<raiz>"


def parse_problem(data: dict[str, Any], origin: str = "<dict>") -> ProblemConfig:
    """Valida o dicionário; erros viram ConfigError com o caminho do primeiro campo."""
    try:
        return ProblemConfig.model_validate(data)
    except ValidationError as e:
        errors = e.errors()
        first = errors[0]
        detail = "; ".join(f"{_field_path(err['loc'])}: {err['msg']}" for err in errors)
        raise ConfigError(detail, location=f"{origin}:{_field_path(first['loc'])}") from e


def load_problem(path: str | Path) -> ProblemConfig:
    """
    Carrega um arquivo de problema JSON ou TOML.

    Raises:
        ConfigError: arquivo ausente, sintaxe inválida (com linha) ou campo inválido (com caminho).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("arquivo de problema não encontrado", location=str(path))
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(str(e), location=str(path)) from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, location=f"{path}:{e.lineno}:{e.colno}") from e
    if not isinstance(data, dict):
        raise ConfigError("o documento deve ser um objeto", location=str(path))
    return parse_problem(data, origin=str(path))


# ============================================
# SCHEMAS: RESPOSTAS DA API
# ============================================

class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class BuiltinSource(BaseModel):
    """Família embutida e seus parâmetros padrão"""
    name: str
    params: dict[str, float]
    c0: float
    beta: float


class ValidationResponse(BaseModel):
    passed: bool
    report: dict[str, Any]


class RunResponse(BaseModel):
    """Resumo de uma execução (mesmo conteúdo do summary.json)"""
    command: str
    summary: dict[str, Any]


class GreenRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    x: tuple[float, float] = (4.0, 0.0)
