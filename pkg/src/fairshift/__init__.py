"""Causal-graph-guided feature selection for fair classifiers that transfer
across domains."""

__version__ = "0.1.0"
