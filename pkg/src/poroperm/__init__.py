"""Pore-network percolation and poroelastic consolidation toolkit."""

__version__ = "1.0.0"
