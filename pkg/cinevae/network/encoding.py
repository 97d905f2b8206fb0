"""Conversion between uint8 label maps and network tensors."""

from collections.abc import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..config import CLASS_COUNT


def labels_to_tensor(labels: np.ndarray | Sequence[np.ndarray]) -> torch.Tensor:
    """uint8 label array(s) -> int64 tensor with the same shape."""
    return torch.from_numpy(np.ascontiguousarray(np.asarray(labels), dtype=np.int64))


def one_hot(labels: torch.Tensor, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """
    (N, S, H, W) class ids -> (N, S * 4, H, W) channels, slice-major.

    Channel s * 4 + c is 1 where slice s holds class c.
    """
    n, s, h, w = labels.shape
    encoded = F.one_hot(labels.long(), CLASS_COUNT)  # (N, S, H, W, C)
    return encoded.permute(0, 1, 4, 2, 3).reshape(n, s * CLASS_COUNT, h, w).to(dtype)


def argmax_labels(probs: torch.Tensor) -> np.ndarray:
    """(..., S, C, H, W) class probabilities -> (..., S, H, W) uint8 label maps."""
    return probs.argmax(dim=-3).to(torch.uint8).cpu().numpy()
