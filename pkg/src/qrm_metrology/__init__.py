"""Criticality-based metrology in the open normal-phase quantum Rabi model."""

__version__ = "0.1.0"
