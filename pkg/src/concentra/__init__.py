"""Scenario-based Expected Shortfall analytics."""

__version__ = "0.1.0"
