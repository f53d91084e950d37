"""Encoder-side control for machine-oriented learned video coding."""

__version__ = "0.1.0"
