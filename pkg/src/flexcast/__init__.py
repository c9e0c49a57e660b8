"""Flexibility-envelope quantification, prediction, approximation and encoding."""

__version__ = "0.1.0"
