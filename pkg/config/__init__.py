"""Config package for the equations-of-state laboratory."""

__version__ = "1.0.0"
