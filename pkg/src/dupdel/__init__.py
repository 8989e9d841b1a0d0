"""Simulation and exact evaluation toolkit for the duplication-deletion random graph."""
from .params import CRITICAL, SUBCRITICAL, SUPERCRITICAL, DomainError, ModelParams

__version__ = "0.1.0"

__all__ = ["ModelParams", "DomainError", "SUBCRITICAL", "CRITICAL", "SUPERCRITICAL"]
