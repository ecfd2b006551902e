"""Workbench for stochastic resource-constrained project scheduling with min/max lags."""

__version__ = "0.1.0"
