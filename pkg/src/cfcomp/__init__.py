"""Counterfactual quantum computation: protocol simulation and bound checks."""
__version__ = "0.1.0"
