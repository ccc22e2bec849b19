"""divscore: dataset diversity measurement toolkit.

Computes distribution- and pairwise-similarity-based diversity metrics
over image/text datasets, ranks dataset variants by them, and correlates
the rankings against downstream classifier performance.
"""

__version__ = "0.1.0"
