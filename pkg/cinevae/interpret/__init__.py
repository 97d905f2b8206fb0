"""Latent-space interpretation: PCA, concept-mean decoding, M-mode and traversals."""

from .decoding import (
    Selector,
    TraversalPoint,
    concept_mean_decode,
    decode_means,
    traverse_boundary,
    traverse_remainder,
)
from .latents import LatentMatrix, PcaProjection, collect_latents, linear_probe, pca2
from .mmode import MModeImage, default_line, line_pixels, mmode

__all__ = [
    "Selector",
    "TraversalPoint",
    "concept_mean_decode",
    "decode_means",
    "traverse_boundary",
    "traverse_remainder",
    "LatentMatrix",
    "PcaProjection",
    "collect_latents",
    "linear_probe",
    "pca2",
    "MModeImage",
    "default_line",
    "line_pixels",
    "mmode",
]
