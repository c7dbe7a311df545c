"""Entanglement-swapping quantum key distribution: simulator and analysis toolkit."""

__version__ = "0.1.0"
