"""Uncertainty quantification of fiber positions in bivariate scalar fields."""

__version__ = "0.1.0"
