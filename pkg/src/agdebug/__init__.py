"""Attribute-grammar evaluation and generalized algorithmic debugging."""

__version__ = "0.1.0"
