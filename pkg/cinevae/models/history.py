"""Data models for training histories."""

from dataclasses import asdict, dataclass, field
from typing import Any, Optional


@dataclass
class EpochRecord:
    """Loss components and validation metrics after one epoch."""
    stage: int
    phase: str                      # "pool", "cohort" or "labeled"
    epoch: int
    total: float
    recon: float
    kl: float
    primary: Optional[float] = None
    concepts: list[Optional[float]] = field(default_factory=list)
    val_dice: Optional[float] = None
    val_primary_bacc: Optional[float] = None
    val_concept_bacc: list[Optional[float]] = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def extend(self, other: "TrainHistory") -> None:
        self.records.extend(other.records)

    def for_stage(self, stage: int) -> list[EpochRecord]:
        return [r for r in self.records if r.stage == stage]

    def __len__(self) -> int:
        return len(self.records)
