"""Product replacement accumulator sampling and desk-scale verification tools."""

__version__ = "0.1.0"
