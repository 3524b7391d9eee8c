"""Exact computations with factorials modulo a prime."""

__version__ = "0.1.0"
