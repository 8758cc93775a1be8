"""Federated scientific-metadata harvesting, indexing, and discovery."""

__version__ = "0.1.0"
