"""Action-removal attacks on self-play reinforcement learning."""

__version__ = "0.1.0"
