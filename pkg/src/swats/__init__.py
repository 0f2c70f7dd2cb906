"""Stage-wise scheduling of graph-structured tasks over stochastic vehicular clouds."""

__version__ = "0.1.0"
