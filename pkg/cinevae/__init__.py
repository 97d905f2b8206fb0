"""Interpretable VAE classification of cardiac cine segmentations."""

__version__ = "0.1.0"
