"""Numerical lab for the convection-diffusion inverse problem with partial data."""

__version__ = "0.3.0"
