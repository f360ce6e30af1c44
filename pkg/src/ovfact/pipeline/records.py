"""Per-sample output records of a scoring run.

Every scored sample yields exactly one SampleScore or one SampleFailure.
Scores serialize flat: the strategy-specific detail fields sit next to the
generic ones in the JSONL record. Failures carry the pipeline stage that
broke, for the per-stage counts in the run summary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import DataError


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    score: float
    degenerate: bool = False
    detail: Mapping[str, object] = field(default_factory=dict)
    evidence: tuple[dict, ...] | None = field(default=None, compare=False)

    def as_record(self) -> dict:
        record = {"id": self.sample_id, "score": self.score, "degenerate": self.degenerate}
        for key, value in self.detail.items():
            if key not in record:
                record[key] = value
        return record

    def cache_value(self) -> dict:
        return {
            "score": self.score,
            "degenerate": self.degenerate,
            "detail": dict(self.detail),
            "evidence": list(self.evidence) if self.evidence is not None else None,
        }

    @classmethod
    def from_cache_value(cls, sample_id: str, value: Mapping) -> SampleScore:
        try:
            evidence = value["evidence"]
            return cls(
                sample_id=sample_id,
                score=float(value["score"]),
                degenerate=bool(value["degenerate"]),
                detail=dict(value["detail"]),
                evidence=tuple(evidence) if evidence is not None else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"corrupt cached score for sample {sample_id}: {exc}") from exc


@dataclass(frozen=True)
class SampleFailure:
    sample_id: str
    stage: str
    error: str

    def as_record(self) -> dict:
        return {"id": self.sample_id, "error": self.error, "stage": self.stage}
