"""Two-player LQG games with belief correction from observed actions."""

__version__ = "0.1.0"
