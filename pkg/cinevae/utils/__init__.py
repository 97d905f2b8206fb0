"""Utility functions."""

from .hashing import canonical_json, file_sha256, sha256_hex
from .logging import get_logger, setup_logging
from .seeding import derive_seed, seeded_torch, torch_generator

__all__ = [
    "setup_logging",
    "get_logger",
    "derive_seed",
    "seeded_torch",
    "torch_generator",
    "canonical_json",
    "sha256_hex",
    "file_sha256",
]
