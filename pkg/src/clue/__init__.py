"""Discovering accounts whose cryptocurrency is permanently locked."""

__version__ = "0.1.0"
