"""Deterministic consumer-finance simulation and credit-decisioning laboratory."""

__version__ = "0.1.0"
