"""Index strategies and approximation algorithms for Markov games with switching costs."""

__version__ = "0.1.0"
