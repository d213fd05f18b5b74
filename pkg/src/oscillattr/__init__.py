"""Stochastic lattices of damped coupled oscillators: energy geometry, pullback attractors, rotation numbers."""

__version__ = "0.1.0"
