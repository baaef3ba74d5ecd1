"""Finite-length secret-key lengths from wireless channel-gain observations."""

__version__ = "0.1.0"
