"""Numerical laboratory for spectral Forrelation, bosonic compressed oracles and flat polynomial approximations."""

__version__ = "0.1.0"
