"""Fractional Scientific Strength (FSS) research-performance analytics."""

__version__ = "0.1.0"
