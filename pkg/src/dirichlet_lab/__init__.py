"""Numerics for Dirichlet operators on rigged Hilbert spaces."""

__version__ = "0.1.0"
