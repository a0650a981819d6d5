"""Anchor-accelerated fixed-point methods and their diagnostics."""

__version__ = "0.1.0"
