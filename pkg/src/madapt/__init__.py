"""Modifier-adaptation real-time optimization with GP mismatch surrogates,
trust regions and Bayesian acquisition functions."""

__version__ = "0.1.0"
