"""Numerical laboratory for Hankel operators on generalized Fock spaces."""

__version__ = "0.1.0"
