"""Encounter-driven information diffusion in robot swarms: simulator,
mean-free-time estimates, and logistic/Gompertz diffusion models."""

__version__ = "0.1.0"
