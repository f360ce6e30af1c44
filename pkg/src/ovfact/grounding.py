"""Visual grounding of entity phrases against an image.

An entity counts as grounded when either tool finds it: the detector route
needs max box confidence at or above the detection threshold, the
segmentation route needs mask confidence at or above its threshold AND mask
coverage at or above the minimum coverage. The grounded set is the union of
both routes; the two tools catch different things ("sky" rarely gets a box
but segments cleanly).

Both tools are queried for every entity by default. ``short_circuit=True``
skips segmentation for entities the detector already accepted; it changes no
grounded/ungrounded outcome, only which evidence fields get filled in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .backends.base import Backends, ObjectDetector, Segmenter
from .errors import DataError
from .model import Entity, EntitySet, ImageRef

DETECTION_THRESHOLD_DEFAULT = 0.3
SEGMENTATION_CONFIDENCE_THRESHOLD_DEFAULT = 0.5
SEGMENTATION_MIN_COVERAGE_DEFAULT = 0.0


@dataclass(frozen=True)
class GroundingConfig:
    """Thresholds for the two grounding routes.

    Thresholds sit in (0, 1): 0 would ground everything, 1 nothing, and both
    extremes are more likely a config typo than an experiment. Minimum
    coverage may be 0 (coverage gate off).
    """

    detection_threshold: float = DETECTION_THRESHOLD_DEFAULT
    segmentation_confidence_threshold: float = SEGMENTATION_CONFIDENCE_THRESHOLD_DEFAULT
    segmentation_min_coverage: float = SEGMENTATION_MIN_COVERAGE_DEFAULT

    def __post_init__(self):
        for name in ("detection_threshold", "segmentation_confidence_threshold"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise DataError(f"{name} must be in (0, 1), got {value}")
        if not (0.0 <= self.segmentation_min_coverage < 1.0):
            raise DataError(
                f"segmentation_min_coverage must be in [0, 1), "
                f"got {self.segmentation_min_coverage}"
            )


@dataclass(frozen=True)
class EntityEvidence:
    """Raw tool scores behind one entity's grounding verdict.

    Segmentation fields are None when the call was short-circuited away.
    """

    detection_score: float | None
    segmentation_confidence: float | None
    segmentation_coverage: float | None
    grounded: bool
    via: tuple[str, ...]


@dataclass(frozen=True)
class GroundingResult:
    """Partition of the candidate set into grounded and ungrounded.

    ``grounded`` is exactly ``via_detection`` union ``via_segmentation``;
    ``ungrounded`` is the rest. Entity order follows the input candidates.
    """

    grounded: EntitySet
    via_detection: EntitySet
    via_segmentation: EntitySet
    ungrounded: EntitySet
    per_entity_evidence: dict[Entity, EntityEvidence] = field(compare=False)

    def __post_init__(self):
        union = {e.dedup_key for e in self.via_detection} | {
            e.dedup_key for e in self.via_segmentation
        }
        if union != {e.dedup_key for e in self.grounded}:
            raise DataError("grounded set is not the union of the two routes")
        overlap = {e.dedup_key for e in self.grounded} & {
            e.dedup_key for e in self.ungrounded
        }
        if overlap:
            raise DataError(f"entities both grounded and ungrounded: {sorted(overlap)}")

    @property
    def candidate_count(self) -> int:
        return len(self.grounded) + len(self.ungrounded)

    def covers(self, candidates: EntitySet) -> bool:
        mine = {e.dedup_key for e in self.grounded} | {
            e.dedup_key for e in self.ungrounded
        }
        return mine == {e.dedup_key for e in candidates}


def ground_entities(
    candidates: EntitySet,
    image: ImageRef,
    config: GroundingConfig,
    detector: ObjectDetector | None,
    segmenter: Segmenter | None,
    *,
    short_circuit: bool = False,
) -> GroundingResult:
    """Ground every candidate entity against one image.

    Queries for one call are batched: at most one detector call and one
    segmenter call per image. Either tool may be None (ablation runs); with
    both None nothing grounds. An empty candidate set grounds trivially with
    zero backend calls.
    """
    if len(candidates) == 0:
        return GroundingResult(
            grounded=EntitySet(),
            via_detection=EntitySet(),
            via_segmentation=EntitySet(),
            ungrounded=EntitySet(),
            per_entity_evidence={},
        )

    surfaces = list(candidates.surfaces)

    det_scores: dict[str, float] = {}
    if detector is not None:
        for result in detector.detect(image, surfaces):
            det_scores[result.query] = result.max_confidence

    detected = {
        surface
        for surface, score in det_scores.items()
        if score >= config.detection_threshold
    }

    seg_scores: dict[str, tuple[float, float]] = {}
    if segmenter is not None:
        if short_circuit:
            seg_queries = [s for s in surfaces if s not in detected]
        else:
            seg_queries = surfaces
        if seg_queries:
            for result in segmenter.segment(image, seg_queries):
                seg_scores[result.query] = (result.confidence, result.coverage)

    segmented = {
        surface
        for surface, (confidence, coverage) in seg_scores.items()
        if confidence >= config.segmentation_confidence_threshold
        and coverage >= config.segmentation_min_coverage
    }

    via_detection: list[Entity] = []
    via_segmentation: list[Entity] = []
    grounded: list[Entity] = []
    ungrounded: list[Entity] = []
    evidence: dict[Entity, EntityEvidence] = {}
    for entity in candidates:
        surface = entity.surface
        in_det = surface in detected
        in_seg = surface in segmented
        if in_det:
            via_detection.append(entity)
        if in_seg:
            via_segmentation.append(entity)
        if in_det or in_seg:
            grounded.append(entity)
        else:
            ungrounded.append(entity)
        seg_entry = seg_scores.get(surface)
        evidence[entity] = EntityEvidence(
            detection_score=det_scores.get(surface),
            segmentation_confidence=seg_entry[0] if seg_entry else None,
            segmentation_coverage=seg_entry[1] if seg_entry else None,
            grounded=in_det or in_seg,
            via=tuple(
                route
                for route, hit in (("detection", in_det), ("segmentation", in_seg))
                if hit
            ),
        )

    return GroundingResult(
        grounded=EntitySet(entities=tuple(grounded)),
        via_detection=EntitySet(entities=tuple(via_detection)),
        via_segmentation=EntitySet(entities=tuple(via_segmentation)),
        ungrounded=EntitySet(entities=tuple(ungrounded)),
        per_entity_evidence=evidence,
    )


def evidence_records(sample_id: str, result: GroundingResult) -> list[dict]:
    """Flatten a grounding result into JSONL-ready evidence records."""
    records = []
    for entity, ev in result.per_entity_evidence.items():
        records.append(
            {
                "sample_id": sample_id,
                "entity": entity.surface,
                "detection_score": ev.detection_score,
                "segmentation_confidence": ev.segmentation_confidence,
                "segmentation_coverage": ev.segmentation_coverage,
                "grounded": ev.grounded,
                "via": list(ev.via),
            }
        )
    return records


def ground_with_backends(
    candidates: EntitySet,
    image: ImageRef,
    config: GroundingConfig,
    backends: Backends,
    *,
    short_circuit: bool = False,
) -> GroundingResult:
    return ground_entities(
        candidates,
        image,
        config,
        backends.detector,
        backends.segmenter,
        short_circuit=short_circuit,
    )
