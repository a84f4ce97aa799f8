"""Variational quantum algorithm toolkit: simulation, VQE, plateaus, classifiers and fidelity."""

__version__ = "0.1.0"
