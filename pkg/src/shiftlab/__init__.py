"""Change-point, difference-in-differences and distribution-shift analysis of event time series."""

__version__ = "0.1.0"
