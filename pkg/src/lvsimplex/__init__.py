"""Lotka-Volterra type operators on the simplex."""

__version__ = "0.1.0"
