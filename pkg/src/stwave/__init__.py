"""Space-time finite elements for tracking-type optimal control of the 1D wave equation."""

__version__ = "0.1.0"
