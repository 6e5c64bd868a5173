"""Keyword-aware influential community queries over attributed graphs."""

__version__ = "0.1"
