"""Hybrid quantum-classical reservoir computing for low-order convection models."""

__version__ = "0.1.0"
