"""Deep Q-learning agents colluding in three-player rock-paper-scissors."""

__version__ = "0.1.0"
