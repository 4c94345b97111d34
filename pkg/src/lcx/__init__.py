"""Explicit pathological maps on test-function spaces, with checkable witnesses."""

__version__ = "0.1.0"
