"""Tools for infinite iterated function systems on the unit interval."""
__version__ = "0.1.0"
