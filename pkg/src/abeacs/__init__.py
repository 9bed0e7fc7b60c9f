"""Attribute-based access control with outsourced CP-ABE on a lightweight PoW blockchain."""

from .errors import ABEACSError

__version__ = "0.1.0"

__all__ = ["ABEACSError", "__version__"]
