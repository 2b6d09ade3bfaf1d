"""Scarcity-constrained allocation simulator."""

__version__ = "0.1.0"
