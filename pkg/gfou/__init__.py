"""Gaussian fractional Ornstein-Uhlenbeck laboratory."""

__version__ = "0.1.0"
