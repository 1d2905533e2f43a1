"""Spectral laboratory for rough parabolic equations on the torus and half plane."""

__version__ = "0.1.0"
