"""Data models for experiment orchestration."""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Optional


class Phase(Enum):
    """Pipeline phases in canonical order."""
    GENERATE = "generate"
    PRETRAIN = "pretrain"
    TRAIN = "train"
    EVAL = "eval"
    INTERPRET = "interpret"


class ArtifactKind(Enum):
    DATASET = "dataset"
    CHECKPOINT = "checkpoint"
    REPORT = "report"
    FIGURE = "figure"
    TABLE = "table"


@dataclass
class ArtifactRecord:
    """One file produced by a phase."""
    path: str                      # relative to the experiment directory
    kind: str                      # ArtifactKind value
    sha256: str
    phase: str                     # Phase value
    created_at: str                # ISO-8601 UTC
    command: str

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class PhaseRecord:
    phase: str
    config_hash: str
    completed_at: str
    artifacts: list[str] = field(default_factory=list)


@dataclass
class ExperimentManifest:
    """Registry of everything an experiment directory contains."""
    config_hash: str
    seeds: dict[str, int] = field(default_factory=dict)
    artifacts: dict[str, ArtifactRecord] = field(default_factory=dict)
    phases: dict[str, PhaseRecord] = field(default_factory=dict)

    def artifacts_of(self, phase: Phase) -> list[ArtifactRecord]:
        return [a for a in self.artifacts.values() if a.phase == phase.value]

    def artifacts_by_kind(self, kind: ArtifactKind) -> list[ArtifactRecord]:
        return [a for a in self.artifacts.values() if a.kind == kind.value]

    def phase_record(self, phase: Phase) -> Optional[PhaseRecord]:
        return self.phases.get(phase.value)

    def to_json(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "seeds": dict(self.seeds),
            "artifacts": {k: v.to_json() for k, v in sorted(self.artifacts.items())},
            "phases": {k: asdict(v) for k, v in sorted(self.phases.items())},
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "ExperimentManifest":
        return cls(
            config_hash=payload["config_hash"],
            seeds=dict(payload.get("seeds", {})),
            artifacts={k: ArtifactRecord(**v) for k, v in payload.get("artifacts", {}).items()},
            phases={k: PhaseRecord(**v) for k, v in payload.get("phases", {}).items()},
        )
