"""Desk-scale generative bearing fault diagnosis from vibration audio."""

__version__ = "0.1.0"
