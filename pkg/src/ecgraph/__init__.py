"""Iterative identifying-while-learning event causality extraction."""

__version__ = "0.1.0"
