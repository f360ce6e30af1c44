"""Human-agreement evaluation for factuality metrics.

Two validation views:

- agreement_rate: given side-by-side human judgments of caption pairs and a
  metric's per-caption scores, how often does the metric's score difference
  point the same way as the human verdict? Neutral verdicts and exact metric
  ties carry no direction, so both are excluded from the denominator; each
  judgment counts independently (no per-sample aggregation).
- specificity: what fraction of human-annotated entities did an extraction
  method recover, where recovery is an exact surface match or embedding
  similarity at or above a threshold?
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backends.base import TextEmbedder
from .errors import DataError, UndefinedRateError
from .model import EntitySet

DEFAULT_SPECIFICITY_THRESHOLD = 0.9


class Axis(str, Enum):
    PRECISION = "precision"
    RECALL = "recall"


class Verdict(str, Enum):
    A_BETTER = "a_better"
    NEUTRAL = "neutral"
    B_BETTER = "b_better"


@dataclass(frozen=True)
class JudgmentRecord:
    """One human side-by-side judgment of two models' captions for a sample."""

    sample_id: str
    model_a: str
    model_b: str
    axis: Axis
    verdict: Verdict
    annotator_id: str

    def __post_init__(self):
        if self.model_a == self.model_b:
            raise DataError(
                f"judgment on sample {self.sample_id}: model_a and model_b "
                f"are both {self.model_a!r}"
            )


def load_judgments(path: str | Path) -> list[JudgmentRecord]:
    """Read judgment records from JSONL."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read judgments {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                JudgmentRecord(
                    sample_id=raw["sample_id"],
                    model_a=raw["model_a"],
                    model_b=raw["model_b"],
                    axis=Axis(raw["axis"]),
                    verdict=Verdict(raw["verdict"]),
                    annotator_id=raw["annotator_id"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: malformed judgment: {exc}") from exc
    if not records:
        raise DataError(f"judgments file {path} is empty")
    return records


@dataclass(frozen=True)
class AgreementBreakdown:
    rate: float
    matched: int
    considered: int
    excluded_neutral: int
    excluded_ties: int

    def as_record(self) -> dict:
        return {
            "rate": self.rate,
            "matched": self.matched,
            "considered": self.considered,
            "excluded_neutral": self.excluded_neutral,
            "excluded_ties": self.excluded_ties,
        }


def agreement_breakdown(
    judgments: Iterable[JudgmentRecord],
    scores: Mapping[tuple[str, str], float],
    axis: Axis,
) -> AgreementBreakdown:
    """Agreement rate of a metric with human verdicts on one axis.

    ``scores`` maps (sample_id, model) to the metric value for that model's
    caption of that sample; every judged pair must be present. Raises
    UndefinedRateError when nothing is left after exclusions.
    """
    matched = 0
    considered = 0
    excluded_neutral = 0
    excluded_ties = 0
    for judgment in judgments:
        if judgment.axis is not axis:
            continue
        score_a = _lookup_score(scores, judgment.sample_id, judgment.model_a)
        score_b = _lookup_score(scores, judgment.sample_id, judgment.model_b)
        if judgment.verdict is Verdict.NEUTRAL:
            excluded_neutral += 1
            continue
        if score_a == score_b:
            excluded_ties += 1
            continue
        considered += 1
        metric_prefers_a = score_a > score_b
        if metric_prefers_a == (judgment.verdict is Verdict.A_BETTER):
            matched += 1
    if considered == 0:
        raise UndefinedRateError(
            f"no judgments left on axis {axis.value!r} after excluding "
            f"{excluded_neutral} neutral and {excluded_ties} tied"
        )
    return AgreementBreakdown(
        rate=matched / considered,
        matched=matched,
        considered=considered,
        excluded_neutral=excluded_neutral,
        excluded_ties=excluded_ties,
    )


def _lookup_score(
    scores: Mapping[tuple[str, str], float], sample_id: str, model: str
) -> float:
    try:
        return scores[(sample_id, model)]
    except KeyError:
        raise DataError(
            f"no metric score for sample {sample_id!r}, model {model!r}"
        ) from None


def agreement_rate(
    judgments: Iterable[JudgmentRecord],
    scores: Mapping[tuple[str, str], float],
    axis: Axis,
) -> float:
    return agreement_breakdown(judgments, scores, axis).rate


@dataclass(frozen=True)
class SpecificityReport:
    """How much of a human-annotated entity set an extractor recovered."""

    matched_count: int
    annotated_count: int
    threshold: float

    def __post_init__(self):
        if self.annotated_count <= 0:
            raise DataError("specificity needs a non-empty annotated set")
        if not (0 <= self.matched_count <= self.annotated_count):
            raise DataError(
                f"matched_count {self.matched_count} out of range for "
                f"{self.annotated_count} annotated entities"
            )

    @property
    def score(self) -> float:
        return self.matched_count / self.annotated_count

    def as_record(self) -> dict:
        return {
            "matched_count": self.matched_count,
            "annotated_count": self.annotated_count,
            "threshold": self.threshold,
            "score": self.score,
        }


def specificity(
    extracted: EntitySet,
    annotated: EntitySet,
    embedder: TextEmbedder,
    *,
    threshold: float = DEFAULT_SPECIFICITY_THRESHOLD,
) -> SpecificityReport:
    """Fraction of annotated entities recovered by the extracted set.

    An annotated entity counts as recovered on an exact (casefolded) surface
    match, or when its best cosine similarity against any extracted surface
    reaches the threshold. Exact matches never need the embedder, so an
    all-exact case (or an empty extracted set) makes zero backend calls.
    """
    if len(annotated) == 0:
        raise ValueError("specificity needs a non-empty annotated set")
    extracted_keys = {e.dedup_key for e in extracted}
    exact = [e for e in annotated if e.dedup_key in extracted_keys]
    remaining = [e for e in annotated if e.dedup_key not in extracted_keys]
    matched = len(exact)
    if remaining and len(extracted) > 0:
        texts: list[str] = []
        index: dict[str, int] = {}
        for surface in (*(e.surface for e in remaining), *extracted.surfaces):
            if surface not in index:
                index[surface] = len(texts)
                texts.append(surface)
        vectors = embedder.embed_texts(texts)
        matrix = np.stack([v.as_array() for v in vectors])
        extracted_rows = matrix[[index[s] for s in extracted.surfaces]]
        for entity in remaining:
            best = float(np.max(extracted_rows @ matrix[index[entity.surface]]))
            if best >= threshold:
                matched += 1
    return SpecificityReport(
        matched_count=matched, annotated_count=len(annotated), threshold=threshold
    )
