"""Quadrotor impulse-disturbance rejection with a trigger-aware PPO policy."""

__version__ = "0.1.0"
