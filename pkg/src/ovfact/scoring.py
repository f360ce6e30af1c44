"""Reference-free factuality scoring of a caption against an image.

Precision is the fraction of the caption's candidate entities that ground
visually. Recall embeds both sides and averages, over the reference
entities, each reference's best cosine similarity to any candidate: soft
coverage instead of exact matching, so "pup" still covers "dog". The
combined score is the harmonic mean.

The reference set comes either from parsing a ground-truth caption or, fully
reference-free, from grounding every vocabulary concept against the image
and keeping the hits.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .backends.base import Backends, ParseRequest, TextEmbedder
from .errors import ConfigError, OvfactError
from .grounding import GroundingConfig, GroundingResult, ground_entities
from .model import (
    CaptionSample,
    EntitySet,
    FactualityScore,
    ReferenceMode,
    SimilarityMatrix,
    Vocabulary,
    build_entity_set,
)


@dataclass(frozen=True)
class ReferenceSetSpec:
    """How to obtain the reference entity set for recall."""

    mode: ReferenceMode
    vocabulary: Vocabulary | None = None

    def __post_init__(self):
        if self.mode is ReferenceMode.FROM_VOCABULARY_GROUNDING and self.vocabulary is None:
            raise ConfigError("vocabulary-grounding reference mode needs a vocabulary")


@contextmanager
def _stage(name: str):
    """Tag escaping errors with the pipeline stage for per-stage accounting."""
    try:
        yield
    except OvfactError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name  # type: ignore[attr-defined]
        raise


def parse_candidates(sample: CaptionSample, backends: Backends) -> EntitySet:
    """Parse the caption into its normalized candidate entity set."""
    with _stage("parse"):
        raw = backends.parser.parse_caption(
            ParseRequest(caption=sample.caption, prompt_id=backends.prompt_id)
        )
    return build_entity_set(raw)


def build_reference_set(
    sample: CaptionSample,
    spec: ReferenceSetSpec,
    config: GroundingConfig,
    backends: Backends,
    *,
    short_circuit: bool = False,
) -> EntitySet:
    """Build the reference entity set for one sample.

    Ground-truth mode parses the sample's reference caption (its absence is
    a configuration error, not a degenerate score). Vocabulary mode grounds
    every concept against the image with the same dual-route grounding used
    for candidates and keeps the grounded ones, in vocabulary order.
    """
    if spec.mode is ReferenceMode.FROM_GT_CAPTION:
        if sample.reference_caption is None:
            raise ConfigError(
                f"sample {sample.id}: reference mode {spec.mode.value} "
                "requires a reference_caption"
            )
        with _stage("reference"):
            raw = backends.parser.parse_caption(
                ParseRequest(
                    caption=sample.reference_caption, prompt_id=backends.prompt_id
                )
            )
        return build_entity_set(raw)

    assert spec.vocabulary is not None
    concepts = build_entity_set(spec.vocabulary.concepts)
    with _stage("reference"):
        grounding = ground_entities(
            concepts,
            sample.image,
            config,
            backends.detector,
            backends.segmenter,
            short_circuit=short_circuit,
        )
    return grounding.grounded


def similarity_matrix(
    references: EntitySet, candidates: EntitySet, embedder: TextEmbedder
) -> SimilarityMatrix:
    """Cosine similarities between reference and candidate surfaces.

    Both sets must be non-empty. Each distinct surface is embedded once per
    call; values are clamped into [-1, 1] against rounding overshoot.
    """
    if len(references) == 0 or len(candidates) == 0:
        raise ValueError("similarity_matrix needs non-empty references and candidates")
    texts: list[str] = []
    index: dict[str, int] = {}
    for surface in (*references.surfaces, *candidates.surfaces):
        if surface not in index:
            index[surface] = len(texts)
            texts.append(surface)
    with _stage("similarity"):
        vectors = embedder.embed_texts(texts)
    matrix = np.stack([v.as_array() for v in vectors])
    ref_rows = matrix[[index[s] for s in references.surfaces]]
    cand_rows = matrix[[index[s] for s in candidates.surfaces]]
    return SimilarityMatrix(values=ref_rows @ cand_rows.T)


def ovfact_precision(grounding: GroundingResult, candidates: EntitySet) -> float:
    """Fraction of candidates that grounded; 0.0 for an empty candidate set."""
    if not grounding.covers(candidates):
        raise ValueError("grounding result does not cover the candidate set")
    if len(candidates) == 0:
        return 0.0
    return len(grounding.grounded) / len(candidates)


def ovfact_recall(similarity: SimilarityMatrix, *, clamp_negative: bool = False) -> float:
    """Mean over references of the best similarity to any candidate.

    0.0 when either side is empty. With ``clamp_negative`` each similarity
    is floored at 0 before taking row maxima; without it raw values are
    kept and only the final mean is clipped into [0, 1], per the score's
    range contract.
    """
    if similarity.rows == 0 or similarity.cols == 0:
        return 0.0
    values = similarity.values
    if clamp_negative:
        values = np.clip(values, 0.0, None)
    best_per_reference = values.max(axis=1)
    return float(min(1.0, max(0.0, float(best_per_reference.mean()))))


def ovfact_f1(precision: float, recall: float) -> float:
    """Harmonic mean; 0.0 when both inputs are 0."""
    for name, value in (("precision", precision), ("recall", recall)):
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ScoredCaption:
    """A FactualityScore plus the intermediates it was computed from."""

    score: FactualityScore
    candidates: EntitySet
    references: EntitySet
    grounding: GroundingResult | None
    similarity: SimilarityMatrix | None


def score_caption_detailed(
    sample: CaptionSample,
    spec: ReferenceSetSpec,
    config: GroundingConfig,
    backends: Backends,
    *,
    short_circuit: bool = False,
    clamp_negative: bool = False,
) -> ScoredCaption:
    """Full scoring pipeline for one sample, intermediates included.

    A caption that parses to zero entities short-circuits to an all-zero
    degenerate score without touching the grounding or embedding backends.
    An empty reference set likewise forces recall to 0 and flags the sample.
    """
    candidates = parse_candidates(sample, backends)
    if len(candidates) == 0:
        return ScoredCaption(
            score=FactualityScore(
                precision=0.0,
                recall=0.0,
                f1=0.0,
                reference_mode=spec.mode,
                candidate_count=0,
                grounded_count=0,
                reference_count=0,
                degenerate=True,
            ),
            candidates=candidates,
            references=EntitySet(),
            grounding=None,
            similarity=None,
        )

    with _stage("ground"):
        grounding = ground_entities(
            candidates,
            sample.image,
            config,
            backends.detector,
            backends.segmenter,
            short_circuit=short_circuit,
        )
    precision = ovfact_precision(grounding, candidates)

    references = build_reference_set(
        sample, spec, config, backends, short_circuit=short_circuit
    )
    if len(references) == 0:
        recall = 0.0
        similarity = None
        degenerate = True
    else:
        similarity = similarity_matrix(references, candidates, backends.embedder)
        recall = ovfact_recall(similarity, clamp_negative=clamp_negative)
        degenerate = False

    return ScoredCaption(
        score=FactualityScore(
            precision=precision,
            recall=recall,
            f1=ovfact_f1(precision, recall),
            reference_mode=spec.mode,
            candidate_count=len(candidates),
            grounded_count=len(grounding.grounded),
            reference_count=len(references),
            degenerate=degenerate,
        ),
        candidates=candidates,
        references=references,
        grounding=grounding,
        similarity=similarity,
    )


def score_caption(
    sample: CaptionSample,
    spec: ReferenceSetSpec,
    config: GroundingConfig,
    backends: Backends,
    *,
    short_circuit: bool = False,
    clamp_negative: bool = False,
) -> FactualityScore:
    """Score one caption; see ``score_caption_detailed`` for intermediates."""
    return score_caption_detailed(
        sample,
        spec,
        config,
        backends,
        short_circuit=short_circuit,
        clamp_negative=clamp_negative,
    ).score
