"""Exact p-adic and S-adic tools for metric Diophantine approximation."""

__version__ = "0.1.0"
