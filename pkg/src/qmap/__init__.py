"""Noise-aware qubit placement, routing and evaluation."""

__version__ = "0.1.0"
