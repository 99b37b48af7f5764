"""Online optimisation driven by predicted Lagrange multipliers."""
__version__ = "0.1.0"
