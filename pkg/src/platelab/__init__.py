"""Numerical laboratory for anisotropic Kirchhoff-Love plates with inclusions."""

__version__ = "0.1.0"
