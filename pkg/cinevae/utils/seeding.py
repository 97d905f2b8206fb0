"""Deterministic seed derivation.

Every random stream in the package is a pure function of a master seed and a
tuple of integer coordinates (stage, epoch, batch index, subject index ...).
"""

from collections.abc import Iterator
from contextlib import contextmanager

import numpy as np
import torch


def derive_seed(seed: int, *coords: int) -> int:
    """Derive a 63-bit child seed from a master seed and integer coordinates."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(c) for c in coords)]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0]
    return int(state) >> 1


def torch_generator(seed: int, *coords: int) -> torch.Generator:
    """CPU generator seeded from (seed, *coords)."""
    gen = torch.Generator(device="cpu")
    gen.manual_seed(derive_seed(seed, *coords))
    return gen


@contextmanager
def seeded_torch(seed: int) -> Iterator[None]:
    """Run a block with the global torch RNG seeded, restoring it afterwards.

    Module constructors draw their initial weights from the global generator,
    so model construction goes through here.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield
