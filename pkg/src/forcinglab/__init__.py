"""Finite combinatorics behind creature-forcing constructions of Cichoń's diagram."""

__version__ = "0.1.0"
