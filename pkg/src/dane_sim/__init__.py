"""Simulated distributed DANE-type solvers for regularised ERM."""
__version__ = "0.1.0"
