"""Transformation-centric tabular optimization.

Automated feature transformation for tabular datasets: an evolving roadmap
graph of derived features, spectral group-wise crossing, and three cascading
Q-learning agents that decide which groups to cross with which operation.
"""

__version__ = "0.1.0"
