"""Relaxation neural networks and PINN baselines for 1-D hyperbolic conservation laws."""

__version__ = "0.1.0"
