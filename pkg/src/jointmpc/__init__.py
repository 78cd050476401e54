"""Joint trajectory and heading MPC for directional-antenna UAV swarms."""

__version__ = "0.1.0"
