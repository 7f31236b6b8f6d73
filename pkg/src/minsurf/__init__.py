"""Double-null laboratory for 1+1 timelike minimal surfaces in R^{1,2}."""

__version__ = "0.1.0"
