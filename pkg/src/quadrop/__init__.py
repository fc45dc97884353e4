"""Numerical laboratory for accretive quadratic differential operators."""

__version__ = "0.1.0"
