"""Rydberg-dressed atom-ion interaction and gate simulation toolkit."""
__version__ = "0.1.0"
