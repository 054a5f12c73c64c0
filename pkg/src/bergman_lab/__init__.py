"""Numerical laboratory for weighted Bergman spaces on the unit disc."""

__version__ = "0.1.0"
