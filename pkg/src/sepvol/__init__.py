"""Quasi-Monte Carlo volumes, hyperareas and separability probabilities of
two-qubit and qubit-qutrit density matrices under monotone metrics."""

__version__ = "0.1.0"
