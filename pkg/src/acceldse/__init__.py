"""Analytical energy/latency model and design-space exploration for row-stationary DNN accelerators."""

__version__ = "0.1.0"
