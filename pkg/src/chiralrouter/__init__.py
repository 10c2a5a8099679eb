"""Chiral excitation routing in spin networks and Rydberg-atom arrays."""

__version__ = "0.1.0"
