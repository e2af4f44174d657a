"""Outlier-robust dynamic assortment optimization under the MNL choice model."""

__version__ = "0.1.0"
