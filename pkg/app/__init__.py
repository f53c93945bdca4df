"""Ampere2D: solver construtivo de Monge-Ampère no plano."""

__version__ = "0.1.0"
