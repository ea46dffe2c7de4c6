"""Robust output regulation of a Kelvin-Voigt damped Euler-Bernoulli beam."""

__version__ = "0.1.0"
