"""Numerical periodic homogenization of convex integrands with Orlicz growth."""

__version__ = "0.1.0"
