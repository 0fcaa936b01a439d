"""Numerical dynamics of fibered endomorphisms of the complex projective plane."""

__version__ = "0.1.0"
