"""Projection-method solver for quasiperiodic elliptic problems."""

__version__ = "0.1.0"
