"""Finsler geometry toolkit: jets, the L-expression language, curvature and SO(3) analysis."""

__version__ = "0.1.0"
