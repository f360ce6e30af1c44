"""Selection strategies: how a sample earns its ranking score.

The metric strategies run the corresponding scoring pipeline per sample.
``random`` derives each sample's score from a seeded hash of the sample id,
not from a sequential generator, so scores do not depend on iteration order
or worker count. ``external_score`` ranks by numbers from a two-column file;
with ``lower_is_better`` (the default, think perplexity) values are negated
so that higher record score always means ranked earlier.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from ..backends.base import Backends
from ..baselines.aloha import aloha_pipeline_score, ovf_alm_score_detailed
from ..errors import ConfigError, DataError
from ..grounding import GroundingConfig, evidence_records
from ..model import CaptionSample, Vocabulary
from ..scoring import ReferenceSetSpec, score_caption_detailed
from .records import SampleScore

Scorer = Callable[[CaptionSample], SampleScore]


class StrategyKind(str, Enum):
    OVFACT_F1 = "ovfact_f1"
    OVFACT_PRECISION_ONLY = "ovfact_precision_only"
    OVFACT_RECALL_ONLY = "ovfact_recall_only"
    OVF_ALM = "ovf_alm"
    ALOHA = "aloha"
    RANDOM = "random"
    EXTERNAL_SCORE = "external_score"


_OVFACT_KINDS = {
    StrategyKind.OVFACT_F1: "f1",
    StrategyKind.OVFACT_PRECISION_ONLY: "precision",
    StrategyKind.OVFACT_RECALL_ONLY: "recall",
}


@dataclass(frozen=True)
class SelectionStrategy:
    """A strategy kind plus the parameters it needs."""

    kind: StrategyKind
    seed: int | None = None
    score_file: str | None = None
    lower_is_better: bool = True

    def __post_init__(self):
        if self.kind is StrategyKind.RANDOM and self.seed is None:
            raise ConfigError("random strategy requires a seed")
        if self.kind is StrategyKind.EXTERNAL_SCORE and not self.score_file:
            raise ConfigError("external_score strategy requires a score file")

    def fingerprint_fields(self) -> dict:
        fields: dict[str, object] = {"kind": self.kind.value}
        if self.kind is StrategyKind.RANDOM:
            fields["seed"] = self.seed
        if self.kind is StrategyKind.EXTERNAL_SCORE:
            fields["lower_is_better"] = self.lower_is_better
            fields["score_file_sha256"] = _file_sha256(self.score_file)
        return fields

    def as_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "score_file": self.score_file,
            "lower_is_better": self.lower_is_better,
        }


def _file_sha256(path: str | None) -> str | None:
    if path is None:
        return None
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise ConfigError(f"cannot read score file {path}: {exc}") from exc


def load_external_scores(path: str | Path) -> dict[str, float]:
    """Read a tab-separated (sample_id, value) file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read score file {path}: {exc}") from exc
    scores: dict[str, float] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(
                f"{path}:{lineno}: expected 'id<TAB>value', got {line!r}"
            )
        sample_id, raw_value = parts[0].strip(), parts[1].strip()
        if sample_id in scores:
            raise DataError(f"{path}:{lineno}: duplicate sample id {sample_id!r}")
        try:
            scores[sample_id] = float(raw_value)
        except ValueError:
            raise DataError(f"{path}:{lineno}: not a number: {raw_value!r}") from None
    if not scores:
        raise DataError(f"score file {path} is empty")
    return scores


def _hash_unit_score(seed: int, sample_id: str) -> float:
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def make_scorer(
    strategy: SelectionStrategy,
    *,
    backends: Backends | None = None,
    reference_spec: ReferenceSetSpec | None = None,
    grounding_config: GroundingConfig | None = None,
    vocabulary: Vocabulary | None = None,
    short_circuit: bool = False,
    clamp_negative: bool = False,
    collect_evidence: bool = False,
    external_scores: Mapping[str, float] | None = None,
) -> Scorer:
    """Bind a strategy to its dependencies, returning a per-sample scorer."""
    kind = strategy.kind

    if kind in _OVFACT_KINDS:
        if backends is None or reference_spec is None or grounding_config is None:
            raise ConfigError(f"strategy {kind.value} needs backends and scoring config")
        attribute = _OVFACT_KINDS[kind]

        def ovfact_scorer(sample: CaptionSample) -> SampleScore:
            detailed = score_caption_detailed(
                sample,
                reference_spec,
                grounding_config,
                backends,
                short_circuit=short_circuit,
                clamp_negative=clamp_negative,
            )
            evidence = None
            if collect_evidence and detailed.grounding is not None:
                evidence = tuple(evidence_records(sample.id, detailed.grounding))
            return SampleScore(
                sample_id=sample.id,
                score=getattr(detailed.score, attribute),
                degenerate=detailed.score.degenerate,
                detail=detailed.score.as_record(),
                evidence=evidence,
            )

        return ovfact_scorer

    if kind in (StrategyKind.OVF_ALM, StrategyKind.ALOHA):
        if backends is None or grounding_config is None or vocabulary is None:
            raise ConfigError(f"strategy {kind.value} needs backends and a vocabulary")

        def matching_scorer(sample: CaptionSample) -> SampleScore:
            if kind is StrategyKind.OVF_ALM:
                result = ovf_alm_score_detailed(
                    sample,
                    vocabulary,
                    grounding_config,
                    backends,
                    short_circuit=short_circuit,
                )
            else:
                result = aloha_pipeline_score(
                    sample, vocabulary, grounding_config, backends
                )
            return SampleScore(
                sample_id=sample.id,
                score=result.score,
                degenerate=result.degenerate,
                detail=result.as_record(),
            )

        return matching_scorer

    if kind is StrategyKind.RANDOM:
        seed = strategy.seed
        assert seed is not None

        def random_scorer(sample: CaptionSample) -> SampleScore:
            return SampleScore(
                sample_id=sample.id, score=_hash_unit_score(seed, sample.id)
            )

        return random_scorer

    if kind is StrategyKind.EXTERNAL_SCORE:
        table = external_scores
        if table is None:
            assert strategy.score_file is not None
            table = load_external_scores(strategy.score_file)
        sign = -1.0 if strategy.lower_is_better else 1.0

        def external_scorer(sample: CaptionSample) -> SampleScore:
            if sample.id not in table:
                raise DataError(f"no external score for sample {sample.id!r}")
            value = table[sample.id]
            return SampleScore(
                sample_id=sample.id,
                score=sign * value,
                detail={"external_value": value},
            )

        return external_scorer

    raise ConfigError(f"unsupported strategy kind: {kind}")
