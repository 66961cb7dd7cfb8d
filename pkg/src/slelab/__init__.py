"""Numerical laboratory for the special Lagrangian equation on box grids."""

__version__ = "0.1.0"
