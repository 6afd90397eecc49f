"""Queueing-network simulator with an R-learning admission controller."""

__version__ = "0.1.0"
