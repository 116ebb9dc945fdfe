"""Evolutionary multi-objective learning of fair classifiers and ensembles."""

__version__ = "0.1.0"
