"""
Hierarquia de erros do Ampere2D
===============================
Cada erro de domínio deriva de ``AmpereError`` e também de ``ValueError``
(problema na entrada) ou ``RuntimeError`` (falha do solver), de modo que
código que captura as exceções padrão continua funcionando.

O atributo ``exit_code`` é usado pela CLI:
  1 → configuração malformada
  2 → falha de validação das hipóteses
  3 → não convergência / falha numérica
"""

from __future__ import annotations

from typing import Any


class AmpereError(Exception):
    """Base de todos os erros do Ampere2D."""

    exit_code: int = 3


# ────────────────────────────────────────────────────────────────
# ENTRADA / CONFIGURAÇÃO
# ────────────────────────────────────────────────────────────────

class ConfigError(AmpereError, ValueError):
    """Arquivo de problema malformado (diagnóstico por linha ou campo)."""

    exit_code = 1

    def __init__(self, message: str, *, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class InvalidSourceError(AmpereError, ValueError):
    """Valor não finito ao avaliar a fonte f."""

    exit_code = 2

    def __init__(self, point: tuple[float, float], value: float):
        self.point = point
        self.value = value
        super().__init__(
            f"Fonte retornou valor não finito {value!r} no ponto "
            f"x=({point[0]:.6g}, {point[1]:.6g})."
        )


class DegenerateSourceError(AmpereError, ValueError):
    """Média esférica não positiva (Monge-Ampère degenerado)."""

    exit_code = 2


class ValidationFailedError(AmpereError, ValueError):
    """Hipóteses sobre a fonte ou dados exteriores violadas."""

    exit_code = 2

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class ExtensionInfeasibleError(AmpereError, ValueError):
    """Nenhuma amplitude γ mantém a extensão positiva."""

    exit_code = 2


class FitWindowError(AmpereError, ValueError):
    """Janela de ajuste assintótico estreita demais (equações normais mal condicionadas)."""

    exit_code = 2


# ────────────────────────────────────────────────────────────────
# FALHAS NUMÉRICAS
# ────────────────────────────────────────────────────────────────

class CoefficientDegeneracyError(AmpereError, RuntimeError):
    """Coeficientes a* perderam elipticidade (autovalor mínimo ≤ 0)."""


class IllPosedModeError(AmpereError, RuntimeError):
    """Fatoração banda singular para um modo angular."""

    def __init__(self, mode: int, detail: str = ""):
        self.mode = mode
        super().__init__(f"Problema de contorno mal posto no modo m={mode}. {detail}".strip())


class NonPerturbativeCoefficientsError(AmpereError, RuntimeError):
    """Correção de defeito divergiu (razão ≥ 1 por 3 passos consecutivos)."""

    def __init__(self, message: str, ratios: list[float] | None = None):
        self.ratios = list(ratios or [])
        super().__init__(message)


class IterationBreakdownError(AmpereError, RuntimeError):
    """Convexidade de U + φ perdida durante a iteração."""

    def __init__(self, level: int, node: tuple[int, int], eigenvalue: float):
        self.level = level
        self.node = node
        self.eigenvalue = eigenvalue
        super().__init__(
            f"Convexidade perdida no nível l={level}: nó (i_r={node[0]}, i_θ={node[1]}) "
            f"com autovalor mínimo {eigenvalue:.3e}."
        )


class NonConvergenceError(AmpereError, RuntimeError):
    """Limite de níveis atingido sem tolerância; carrega o histórico completo."""

    def __init__(self, message: str, history: list[dict] | None = None):
        self.history = list(history or [])
        super().__init__(message)


class BoundaryConsistencyError(AmpereError, RuntimeError):
    """Erro de contorno acima de 10·tol após a convergência da cascata exterior."""


class OracleFailureError(AmpereError, RuntimeError):
    """Oráculo de estêncil largo não convergiu dentro do limite de iterações."""
