"""Time-adaptive echo state networks and GRUs for irregularly sampled series."""

__version__ = "0.1.0"
