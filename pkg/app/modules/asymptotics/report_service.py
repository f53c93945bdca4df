"""
Run Report Service v1.0
=======================
Resumo executivo em PDF de uma execução (comando ``report``).

Utiliza fpdf2 com texto Latin-1 (símbolos fora do conjunto são trocados),
cards de KPI para d_fit, c_fit, sigma_fit e max_residual, e a tabela
zebrada do histórico de iterações.

Autor: Ampere2D Engine
"""

from __future__ import annotations

import math
from datetime import datetime
from typing import Any

from fpdf import FPDF
from fpdf.enums import XPos, YPos

# ============================================================
# CONSTANTES DE DESIGN
# ============================================================
_SLATE = (38, 50, 56)
_TEAL = (0, 121, 107)
_TEAL_SOFT = (224, 242, 241)
_AMBER = (191, 120, 0)
_AMBER_SOFT = (255, 244, 224)
_CRIMSON = (160, 30, 50)
_CRIMSON_SOFT = (252, 232, 236)
_RULE = (176, 190, 197)
_ROW_ALT = (245, 247, 248)
_MUTED = (120, 130, 136)
_WHITE = (255, 255, 255)

_HEADER_H = 16
_MAX_HISTORY_ROWS = 40

_COMMAND_LABELS: dict[str, str] = {
    "solve-global": "Solucao global",
    "solve-exterior": "Problema exterior",
    "oracle-compare": "Comparacao com oraculo",
}


# ============================================================
# FUNCOES AUXILIARES
# ============================================================
def _safe_str(value: Any, fallback: str = "N/A") -> str:
    """Converte qualquer valor para string segura para Latin-1 (fpdf2)."""
    if value is None:
        return fallback
    text = str(value)
    return text.encode("latin-1", "replace").decode("latin-1")


def _format_num(value: Any, digits: int = 6) -> str:
    if value is None:
        return "N/A"
    try:
        v = float(value)
    except (TypeError, ValueError):
        return _safe_str(value)
    if not math.isfinite(v):
        return "N/A"
    return f"{v:.{digits}g}"


_NL = {"new_x": XPos.LMARGIN, "new_y": YPos.NEXT}
_RT = {"new_x": XPos.RIGHT, "new_y": YPos.TOP}


# ============================================================
# CLASSE PDF
# ============================================================
class AmperePDF(FPDF):
    """Título à esquerda com faixa fina, rodapé só com problema e página."""

    def __init__(self, title: str = "", subtitle: str = ""):
        super().__init__()
        self._title = _safe_str(title, "Execucao")
        self._subtitle = _safe_str(subtitle, "")
        self._stamp = datetime.now().strftime("%Y-%m-%d %H:%M")

    def header(self):
        self.set_xy(10, 8)
        self.set_font("Helvetica", "B", 13)
        self.set_text_color(*_SLATE)
        self.cell(120, 6, "Ampere2D", border=0, align="L", **_RT)
        self.set_font("Helvetica", "", 8)
        self.set_text_color(*_MUTED)
        self.cell(70, 6, f"{self._subtitle}  -  {self._stamp}", border=0, align="R", **_NL)

        self.set_fill_color(*_TEAL)
        self.rect(10, _HEADER_H, 190, 0.8, "F")
        self.set_y(_HEADER_H + 4)

    def footer(self):
        self.set_y(-12)
        self.set_font("Helvetica", "", 7)
        self.set_text_color(*_MUTED)
        self.cell(0, 6, f"{self._title}   {self.page_no()}/{{nb}}", border=0, align="C", **_NL)

    def section_title(self, title: str, color: tuple = _TEAL):
        y = self.get_y() + 2
        self.set_fill_color(*color)
        self.rect(10, y + 1, 1.6, 5, "F")
        self.set_xy(14, y)
        self.set_font("Helvetica", "B", 11)
        self.set_text_color(*_SLATE)
        self.cell(0, 7, title, border=0, align="L", **_NL)
        self.ln(2)

    def kpi_card(self, x: float, y: float, w: float, h: float,
                 label: str, value: str, bg: tuple, label_color: tuple):
        self.set_fill_color(*bg)
        self.rect(x, y, w, h, "F")
        self.set_fill_color(*label_color)
        self.rect(x, y, w, 1.2, "F")

        self.set_xy(x + 3, y + 4)
        self.set_font("Helvetica", "", 8)
        self.set_text_color(*label_color)
        self.cell(w - 6, 5, label, border=0, align="L", **_NL)

        self.set_xy(x + 3, y + 11)
        self.set_font("Courier", "B", 11)
        self.set_text_color(*_SLATE)
        self.cell(w - 6, 8, value, border=0, align="L", **_NL)


# ============================================================
# SERVICE PRINCIPAL
# ============================================================
class RunReportService:
    """Gera o PDF de uma execução a partir do summary JSON e do histórico."""

    @staticmethod
    def _fit_block(summary: dict) -> dict:
        fit = summary.get("fit") or {}
        residual = summary.get("residual") or {}
        return {
            "d_fit": fit.get("d_fit", summary.get("d_fit")),
            "c_fit": fit.get("c_fit", summary.get("c_d")),
            "sigma_fit": fit.get("sigma_fit"),
            "max_residual": residual.get("max_residual", fit.get("max_residual")),
        }

    @classmethod
    def generate(cls, summary: dict, history: list[dict] | None = None, *, title: str = "") -> bytes:
        """
        Args:
            summary: Conteúdo do summary.json da execução.
            history: Linhas do histórico (níveis da cascata).
            title: Nome do problema.

        Returns:
            bytes do PDF

        Raises:
            RuntimeError: erro na renderização
        """
        command = summary.get("command", "")
        pdf = AmperePDF(title=title or summary.get("problem", ""),
                        subtitle=_COMMAND_LABELS.get(command, _safe_str(command)))
        pdf.alias_nb_pages()
        pdf.add_page()
        pdf.set_auto_page_break(auto=True, margin=20)

        # -- 1. Cards --
        kpis = cls._fit_block(summary)
        pdf.section_title("Indicadores do ajuste")
        cw, ch, sp = 44, 22, 4
        sx, sy = 10, pdf.get_y()
        cards = [
            ("d_fit", _format_num(kpis["d_fit"], 8), _TEAL_SOFT, _TEAL),
            ("c_fit", _format_num(kpis["c_fit"], 8), _TEAL_SOFT, _TEAL),
            ("sigma_fit", _format_num(kpis["sigma_fit"], 4), _AMBER_SOFT, _AMBER),
            ("max_residual", _format_num(kpis["max_residual"], 3), _CRIMSON_SOFT, _CRIMSON),
        ]
        for k, (label, value, bg, fg) in enumerate(cards):
            pdf.kpi_card(sx + k * (cw + sp), sy, cw, ch, label, value, bg, fg)
        pdf.set_xy(10, sy + ch + 6)

        # -- 2. Parâmetros: chave/valor com régua inferior --
        pdf.section_title("Parametros da execucao")
        rows = [(key, summary[key]) for key in sorted(summary)
                if not isinstance(summary[key], (dict, list))]
        pdf.set_draw_color(*_RULE)
        pdf.set_line_width(0.2)
        for label, value in rows:
            pdf.set_font("Helvetica", "", 9)
            pdf.set_text_color(*_MUTED)
            pdf.cell(55, 6, _safe_str(label), border="B", align="L", **_RT)
            pdf.set_font("Courier", "", 9)
            pdf.set_text_color(*_SLATE)
            pdf.cell(135, 6, _format_num(value, 10)[:70], border="B", align="R", **_NL)
        pdf.ln(5)

        # -- 3. Histórico --
        pdf.section_title("Historico das iteracoes", _AMBER)
        history = list(history or [])
        if history:
            columns = list(history[0].keys())[:5]
            width = 190 / len(columns)
            pdf.set_font("Helvetica", "B", 8)
            pdf.set_fill_color(*_SLATE)
            pdf.set_text_color(*_WHITE)
            for j, col in enumerate(columns):
                pdf.cell(width, 6, _safe_str(col), border=0, align="C", fill=True,
                         **(_NL if j == len(columns) - 1 else _RT))
            pdf.set_font("Courier", "", 8)
            pdf.set_text_color(*_SLATE)
            for i, row in enumerate(history[:_MAX_HISTORY_ROWS]):
                pdf.set_fill_color(*(_ROW_ALT if i % 2 else _WHITE))
                for j, col in enumerate(columns):
                    pdf.cell(width, 5, _format_num(row.get(col), 4), border=0, align="R", fill=True,
                             **(_NL if j == len(columns) - 1 else _RT))
            if len(history) > _MAX_HISTORY_ROWS:
                pdf.set_font("Helvetica", "I", 8)
                pdf.set_text_color(*_MUTED)
                pdf.cell(0, 6, f"... {len(history) - _MAX_HISTORY_ROWS} niveis omitidos", border=0, align="L", **_NL)
        else:
            pdf.set_font("Helvetica", "I", 9)
            pdf.set_text_color(*_MUTED)
            pdf.cell(0, 8, "Nenhum historico registrado para esta execucao.", border=0, align="L", **_NL)

        try:
            raw = pdf.output()
            if isinstance(raw, bytearray):
                return bytes(raw)
            if isinstance(raw, str):
                return raw.encode("latin-1")
            return raw  # type: ignore
        except Exception as e:
            raise RuntimeError(f"Falha ao renderizar PDF: {e}")
