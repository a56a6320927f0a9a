"""Simulation and verification of quenched hitting statistics for random subshifts of finite type."""

__version__ = "0.1.0"
