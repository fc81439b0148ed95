"""Isogeometric FEM-BEM coupling for 2D nonlinear interface problems."""

__version__ = "0.1.0"
