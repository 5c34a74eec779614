"""Deterministic simulator for energy-aware gossip in wireless sensor networks."""

__version__ = "0.1.0"
