"""Exact cumulants and verification tooling for von Neumann entanglement entropy."""
__version__ = "0.1.0"
