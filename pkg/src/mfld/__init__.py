"""Desk-scale verification toolkit for mean-field structure on the cube."""

__version__ = "0.1.0"
