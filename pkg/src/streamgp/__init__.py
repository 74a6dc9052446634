"""Exact, sparse and streaming Gaussian-process regression for environmental fields."""

__version__ = "0.1.0"
