"""ggbench: measure general game intelligence by sampling a game language."""

__version__ = "0.1.0"
