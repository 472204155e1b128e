"""trendlag: deterministic test of whether a lagged exogenous series improves
short-horizon forecasts of a weekly count series."""

__version__ = "0.1.0"
