"""Queueing model of a one-sided limit order book.

Closed-form stationary shapes (discrete, continuous and bulk-size books),
their special-function backbone, a diffusive reference shape for comparison
and an exact Monte Carlo simulator used as an oracle.
"""

__version__ = "0.1.0"
