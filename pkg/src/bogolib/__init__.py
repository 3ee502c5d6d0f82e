"""Gaussian-state toolkit for the discretized 1D Bose gas in the phonon regime."""
__version__ = "0.1.0"
