"""Momentum maps, local normal forms and singular symplectic reduction in finite dimensions."""
from . import action, cli, gauge2d, normalform, reduction, repvar, symplin

__all__ = ["action", "cli", "gauge2d", "normalform", "reduction", "repvar", "symplin"]
__version__ = "0.1.0"
