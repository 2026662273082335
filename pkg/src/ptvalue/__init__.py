"""Permanent/transient value decomposition for continual reinforcement learning."""

__version__ = "0.1.0"
