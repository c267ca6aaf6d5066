"""Thermostatted harmonic chain: microscopic simulation, kinetic limit and coefficients."""

__version__ = "0.1.0"
