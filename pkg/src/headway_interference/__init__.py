"""Interference moments of one-dimensional vehicular networks with hardcore headways."""

__version__ = "0.1.0"
