"""
Configuração de processo do Ampere2D.

Lê variáveis de ambiente com prefixo ``AMPERE2D_`` (e o arquivo ``.env``,
via python-dotenv) usando pydantic-settings.
"""

from __future__ import annotations

from functools import lru_cache

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="AMPERE2D_", env_file=".env", extra="ignore")

    threads: int = Field(default=1, ge=1, description="Limite de workers para solves por modo")
    log_level: str = Field(default="INFO")
    output_dir: str = Field(default="runs")
    eps0_threshold: float = Field(default=0.1, gt=0, description="Limiar empírico de ε₀")
    r0_threshold: float = Field(default=0.1, gt=0, description="Desvio de coeficientes para a heurística R₀")


@lru_cache
def get_settings() -> Settings:
    return Settings()
