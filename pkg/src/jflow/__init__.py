"""Exact slope stability and J-flow numerics."""
__version__ = "0.1.0"
