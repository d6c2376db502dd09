"""Adaptive Robust Clipping and the Byzantine-robust distributed learning stack around it."""

__version__ = "0.1.0"
