"""Virtual-screening toolkit for pIC50 regression datasets."""

__version__ = "0.1.0"
