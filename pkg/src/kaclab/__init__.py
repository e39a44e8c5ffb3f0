"""Zeros of random Kac polynomials near the unit circle and their GAF limit."""

__version__ = "0.1.0"
