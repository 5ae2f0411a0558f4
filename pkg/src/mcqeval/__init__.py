"""Grounded MCQ generation and dual-judge equivalence evaluation pipeline."""

__version__ = "0.1.0"
