"""Numerical laboratory for weighted Lorentz-Finsler spacetimes."""

__version__ = "0.1.0"
