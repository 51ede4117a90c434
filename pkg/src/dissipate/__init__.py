"""Hysteretic energy processing and NCDE regression for RC shear walls."""

__version__ = "0.1.0"
