"""Directional Fourier-ODE solvers for simply characteristic constant-coefficient PDEs."""

from .poly import MultiPoly, parse_poly

__version__ = "0.1.0"

__all__ = ["MultiPoly", "parse_poly", "__version__"]
