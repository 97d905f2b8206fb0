"""Binary dataset container (``.segs``) and its JSON sidecar.

Layout (little endian)::

    "SEGS" | version u8 | n_subjects u32
    per subject:
        S u8 | T u8 | H u16 | W u16 | y u8 | K u8 | y_k K x u8 | seed u64
        6 x f64 factors | S*T*H*W label bytes (slice, frame, row, column)

Unlabeled pool subjects store y = 255. Frames are stored at uniform phases.
"""

import json
import struct
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..errors import DatasetFormatError, RejectedInputError
from ..models.phantom import RV_BLOOD, GenerativeFactors, LabeledSubject, SegSequence, uniform_phases
from ..utils.logging import get_logger

logger = get_logger("cinevae.phantom")

MAGIC = b"SEGS"
FORMAT_VERSION = 1
UNLABELED = 255

_HEADER = struct.Struct("<4sBI")
_DIMS = struct.Struct("<BBHHBB")
_SEED = struct.Struct("<Q")
_FACTORS = struct.Struct("<6d")
SEED_LIMIT = 2**64


def sidecar_path(path: Path) -> Path:
    """cohort.segs -> cohort.meta.json"""
    return path.with_name(path.stem + ".meta.json")


def _encode_subject(subject: LabeledSubject) -> bytes:
    labels = subject.sequence.labels
    t, s, h, w = labels.shape
    if max(s, t) > 255 or max(h, w) > 65535:
        raise RejectedInputError(f"sequence shape {labels.shape} exceeds the container limits")
    if not np.allclose(subject.sequence.frame_phase, uniform_phases(t)):
        raise RejectedInputError("only uniformly phased sequences can be stored")
    if not 0 <= subject.seed < SEED_LIMIT:
        raise RejectedInputError(f"seed {subject.seed} does not fit the u64 seed field")
    y = UNLABELED if subject.y is None else subject.y
    parts = [
        _DIMS.pack(s, t, h, w, y, len(subject.y_k)),
        bytes(subject.y_k),
        _SEED.pack(subject.seed),
        _FACTORS.pack(*subject.factors.as_tuple()),
        np.ascontiguousarray(labels.transpose(1, 0, 2, 3)).tobytes(),
    ]
    return b"".join(parts)


def save_dataset(
    subjects: Sequence[LabeledSubject],
    path: Path,
    generator: Optional[dict[str, Any]] = None,
) -> Path:
    """
    Write subjects to a .segs file plus a .meta.json sidecar.

    Args:
        subjects: Subjects to store (labeled or pool)
        path: Destination file
        generator: Generator parameters copied into the sidecar

    Returns:
        Path of the binary file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = b"".join(_encode_subject(s) for s in subjects)
    path.write_bytes(_HEADER.pack(MAGIC, FORMAT_VERSION, len(subjects)) + body)

    meta = {
        "format": "SEGS",
        "version": FORMAT_VERSION,
        "n_subjects": len(subjects),
        "generator": generator or {},
        "subjects": [
            {
                "index": i,
                "seed": s.seed,
                "y": s.y,
                "y_k": list(s.y_k),
                "shape": list(s.sequence.shape),
                "factors": dict(
                    zip(GenerativeFactors.__dataclass_fields__, s.factors.as_tuple())
                ),
            }
            for i, s in enumerate(subjects)
        ],
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2))
    logger.info(f"Saved {len(subjects)} subjects to {path}")
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, field: str) -> bytes:
        if self.pos + size > len(self.data):
            raise DatasetFormatError(
                field, f"truncated: needed {size} bytes at offset {self.pos}, file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: struct.Struct, field: str) -> tuple[Any, ...]:
        return fmt.unpack(self.take(fmt.size, field))


def _decode_subject(reader: _Reader, index: int) -> LabeledSubject:
    prefix = f"subject[{index}]"
    s, t, h, w, y, k = reader.unpack(_DIMS, f"{prefix}.dims")
    for name, value in (("S", s), ("T", t), ("H", h), ("W", w)):
        if value == 0:
            raise DatasetFormatError(f"{prefix}.{name}", "dimension is zero")
    if y not in (0, 1, UNLABELED):
        raise DatasetFormatError(f"{prefix}.y", f"invalid primary label {y}")
    y_k = list(reader.take(k, f"{prefix}.y_k"))
    if any(v not in (0, 1) for v in y_k):
        raise DatasetFormatError(f"{prefix}.y_k", f"invalid concept labels {y_k}")
    (seed,) = reader.unpack(_SEED, f"{prefix}.seed")
    factors = GenerativeFactors(*reader.unpack(_FACTORS, f"{prefix}.factors"))
    raw = reader.take(s * t * h * w, f"{prefix}.labels")
    labels = np.frombuffer(raw, dtype=np.uint8).reshape(s, t, h, w).transpose(1, 0, 2, 3)
    if labels.max() > RV_BLOOD:
        raise DatasetFormatError(f"{prefix}.labels", "class id outside {0, 1, 2, 3}")
    return LabeledSubject(
        sequence=SegSequence(np.ascontiguousarray(labels)),
        y=None if y == UNLABELED else int(y),
        y_k=y_k,
        factors=factors,
        seed=int(seed),
    )


def load_dataset(path: Path) -> list[LabeledSubject]:
    """
    Read a .segs file.

    Raises:
        DatasetFormatError: naming the offending field (magic, version, dims, truncation ...)
    """
    reader = _Reader(Path(path).read_bytes())
    magic, version, n = reader.unpack(_HEADER, "header")
    if magic != MAGIC:
        raise DatasetFormatError("magic", f"expected {MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError("version", f"unsupported version {version}")
    subjects = [_decode_subject(reader, i) for i in range(n)]
    if reader.pos != len(reader.data):
        raise DatasetFormatError("n_subjects", f"{len(reader.data) - reader.pos} trailing bytes")
    logger.debug(f"Loaded {n} subjects from {path}")
    return subjects
