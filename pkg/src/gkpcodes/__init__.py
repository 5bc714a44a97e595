"""Oscillator-to-oscillator GKP stabilizer codes under additive Gaussian noise."""

__version__ = "0.1.0"
