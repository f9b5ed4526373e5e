"""Toolkit for symmetric eigenvalue maximization on triangulated surfaces."""

__version__ = "0.1.0"
