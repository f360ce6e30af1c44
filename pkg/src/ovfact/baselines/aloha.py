"""ALOHa-style matching baselines.

ALOHa scores a caption by Hungarian-matching candidate entities to reference
entities on embedding similarity and reporting the minimum matched
similarity. The known failure mode is structural: when there are fewer
references than candidates, the surplus candidates are simply never matched
and cannot drag the score down, and conversely a hallucination can be forced
into a spurious match with a leftover reference. The regression tests pin
both behaviors; the point of carrying this baseline is comparing against
them.

Two pipeline variants share that matching core:

- reference-free ALOHa: references are the vocabulary concepts the detector
  alone grounds in the image;
- the hybrid: open-vocabulary parsing plus dual-route (detector and
  segmenter) grounding builds the references, then ALOHa matching scores.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..backends.base import Backends, TextEmbedder
from ..grounding import GroundingConfig
from ..model import CaptionSample, EntitySet, ReferenceMode, Vocabulary
from ..scoring import (
    ReferenceSetSpec,
    build_reference_set,
    parse_candidates,
    similarity_matrix,
)
from .assignment import hungarian_assignment


def aloha_score(
    references: EntitySet, candidates: EntitySet, embedder: TextEmbedder
) -> float:
    """Minimum matched similarity under maximum-total one-to-one matching.

    Candidates must be non-empty. An empty reference set cannot be matched
    at all and scores a degenerate 0.0. With fewer references than
    candidates, unmatched candidates are ignored by construction.
    """
    if len(candidates) == 0:
        raise ValueError("aloha_score needs a non-empty candidate set")
    if len(references) == 0:
        return 0.0
    similarity = similarity_matrix(references, candidates, embedder)
    assignment = hungarian_assignment(similarity)
    return min(float(similarity.values[r, c]) for r, c in assignment.pairs)


@dataclass(frozen=True)
class MatchingBaselineResult:
    """Caption-level matching score plus the counts behind it."""

    score: float
    candidate_count: int
    reference_count: int
    degenerate: bool

    def as_record(self) -> dict:
        return {
            "candidate_count": self.candidate_count,
            "reference_count": self.reference_count,
            "degenerate": self.degenerate,
        }


def _matching_baseline(
    sample: CaptionSample,
    vocabulary: Vocabulary,
    config: GroundingConfig,
    backends: Backends,
    *,
    use_segmenter: bool,
    short_circuit: bool = False,
) -> MatchingBaselineResult:
    candidates = parse_candidates(sample, backends)
    if len(candidates) == 0:
        return MatchingBaselineResult(
            score=0.0, candidate_count=0, reference_count=0, degenerate=True
        )
    grounding_backends = backends if use_segmenter else Backends(
        parser=backends.parser,
        detector=backends.detector,
        segmenter=None,
        embedder=backends.embedder,
        prompt_id=backends.prompt_id,
    )
    references = build_reference_set(
        sample,
        ReferenceSetSpec(
            mode=ReferenceMode.FROM_VOCABULARY_GROUNDING, vocabulary=vocabulary
        ),
        config,
        grounding_backends,
        short_circuit=short_circuit,
    )
    if len(references) == 0:
        return MatchingBaselineResult(
            score=0.0,
            candidate_count=len(candidates),
            reference_count=0,
            degenerate=True,
        )
    return MatchingBaselineResult(
        score=aloha_score(references, candidates, backends.embedder),
        candidate_count=len(candidates),
        reference_count=len(references),
        degenerate=False,
    )


def aloha_pipeline_score(
    sample: CaptionSample,
    vocabulary: Vocabulary,
    config: GroundingConfig,
    backends: Backends,
) -> MatchingBaselineResult:
    """Reference-free ALOHa: detector-only grounded concepts as references."""
    return _matching_baseline(sample, vocabulary, config, backends, use_segmenter=False)


def ovf_alm_score_detailed(
    sample: CaptionSample,
    vocabulary: Vocabulary,
    config: GroundingConfig,
    backends: Backends,
    *,
    short_circuit: bool = False,
) -> MatchingBaselineResult:
    """Hybrid: open-vocabulary parsing/grounding, ALOHa matching on top."""
    return _matching_baseline(
        sample,
        vocabulary,
        config,
        backends,
        use_segmenter=True,
        short_circuit=short_circuit,
    )


def ovf_alm_score(
    sample: CaptionSample,
    vocabulary: Vocabulary,
    config: GroundingConfig,
    backends: Backends,
    *,
    short_circuit: bool = False,
) -> float:
    return ovf_alm_score_detailed(
        sample, vocabulary, config, backends, short_circuit=short_circuit
    ).score
