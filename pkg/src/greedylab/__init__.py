"""Finite-window laboratory for weighted greedy approximation."""

__version__ = "0.1.0"
