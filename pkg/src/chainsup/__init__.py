"""Chaining functionals, increment metrics and Monte-Carlo suprema for
canonical processes X_t = sum_i t_i X_i with regular coordinate laws."""

from . import dist, gamma, metric, stochlab, tailkit, verify
from .metric import IndexSet, ProcessSpec
from .streams import RngStream

__version__ = "0.1.0"

__all__ = [
    "dist", "tailkit", "metric", "gamma", "stochlab", "verify",
    "IndexSet", "ProcessSpec", "RngStream", "__version__",
]
