"""Baseline metrics: CHAIR, assignment-based ALOHa variants, and the hybrid."""

from .aloha import (
    MatchingBaselineResult,
    aloha_pipeline_score,
    aloha_score,
    ovf_alm_score,
    ovf_alm_score_detailed,
)
from .assignment import (
    KERNEL_BACKEND,
    PAD_SIMILARITY,
    Assignment,
    hungarian_assignment,
)
from .chair import ClosedVocabulary, chair_i, chair_parse, chair_s, split_sentences

__all__ = [
    "MatchingBaselineResult",
    "aloha_pipeline_score",
    "aloha_score",
    "ovf_alm_score",
    "ovf_alm_score_detailed",
    "KERNEL_BACKEND",
    "PAD_SIMILARITY",
    "Assignment",
    "hungarian_assignment",
    "ClosedVocabulary",
    "chair_i",
    "chair_parse",
    "chair_s",
    "split_sentences",
]
