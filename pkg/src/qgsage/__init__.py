"""Quantum graph aggregators for inductive node regression on molecules."""

__version__ = "0.1.0"
