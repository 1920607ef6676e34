"""Noise-radar range-Doppler processing with Doppler and stretch compensation."""

__version__ = "0.1.0"
