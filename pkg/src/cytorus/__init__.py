"""Solver and verification harness for the one-form Calabi-Yau equation on flat tori."""

__version__ = "0.1.0"
