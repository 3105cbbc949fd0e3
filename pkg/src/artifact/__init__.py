"""Spectral tools for fourth-order dispersive ground states and Fourier-side interpolation inequalities."""

__version__ = "0.1.0"
