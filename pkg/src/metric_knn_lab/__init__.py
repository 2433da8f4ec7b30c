"""k-NN consistency and metric-geometry lab."""

__version__ = "0.1.0"
