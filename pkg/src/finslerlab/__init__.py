"""Numerical verification of conformal rigidity results for Finsler metrics."""

__version__ = "0.1.0"
