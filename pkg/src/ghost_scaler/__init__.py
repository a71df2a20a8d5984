"""Slowing-down transients near a saddle-node: stochastic simulation vs. WKB."""

__version__ = "0.1.0"
