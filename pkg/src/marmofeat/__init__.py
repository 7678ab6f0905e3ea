"""Feature representations and classifiers for marmoset vocalization analysis."""

__version__ = "0.1.0"
