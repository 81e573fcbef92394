"""Numerical lab for the semilinear Klein-Gordon equation in Minkowski and de Sitter spacetimes."""

__version__ = "0.1.0"
