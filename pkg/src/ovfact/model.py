"""Core data model: entities, samples, vocabularies, scores.

Everything downstream (grounding, scoring, filtering) speaks in terms of
these types. All of them are frozen: scoring runs are concurrent and the
same objects get shared across worker threads.

Entity identity is the full attribute-qualified surface phrase, casefolded.
"red blanket" and "blanket" are different entities on purpose: grounding a
bare head noun would let an ungrounded attribute ride along for free.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError, NormalizationError

_SCORE_EPS = 1e-12


class ReferenceMode(str, Enum):
    """How the reference entity set for recall is obtained."""

    FROM_GT_CAPTION = "from_gt_caption"
    FROM_VOCABULARY_GROUNDING = "from_vocabulary_grounding"


@dataclass(frozen=True)
class Entity:
    """One normalized entity phrase.

    ``surface`` is the casefolded, whitespace-collapsed phrase and joins back
    from ``attributes`` + ``head``; ``head`` is the last token, everything
    before it is treated as attributes. No lemmatization: "dogs" stays "dogs".
    """

    surface: str
    head: str
    attributes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.head:
            raise NormalizationError("entity head must be non-empty")
        joined = " ".join((*self.attributes, self.head))
        if joined != self.surface:
            raise NormalizationError(
                f"entity surface {self.surface!r} does not round-trip "
                f"from attributes + head ({joined!r})"
            )

    @property
    def dedup_key(self) -> str:
        return self.surface.casefold()


def normalize_entity(raw: str) -> Entity:
    """Normalize a raw phrase from a parser into an Entity.

    Casefolds, collapses internal whitespace, and splits off the head noun
    (last token). Raises NormalizationError when nothing is left after
    trimming.
    """
    tokens = raw.casefold().split()
    if not tokens:
        raise NormalizationError(f"entity phrase is empty after trimming: {raw!r}")
    return Entity(surface=" ".join(tokens), head=tokens[-1], attributes=tuple(tokens[:-1]))


@dataclass(frozen=True)
class EntitySet:
    """Ordered, duplicate-free collection of entities.

    Order is first occurrence; duplicates (by casefolded surface) are
    rejected at construction, so build via ``build_entity_set`` or
    ``EntitySet.from_entities`` which deduplicate.

    ``dropped`` counts raw phrases discarded during normalization; it is
    bookkeeping, not identity.
    """

    entities: tuple[Entity, ...] = ()
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        keys = [e.dedup_key for e in self.entities]
        if len(set(keys)) != len(keys):
            raise DataError("EntitySet constructed with duplicate surfaces")

    @staticmethod
    def from_entities(entities: Iterable[Entity], dropped: int = 0) -> EntitySet:
        seen: dict[str, Entity] = {}
        for entity in entities:
            seen.setdefault(entity.dedup_key, entity)
        return EntitySet(entities=tuple(seen.values()), dropped=dropped)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(e.surface for e in self.entities)

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)

    def __contains__(self, item: object) -> bool:
        if isinstance(item, Entity):
            item = item.surface
        if isinstance(item, str):
            key = item.casefold()
            return any(e.dedup_key == key for e in self.entities)
        return False

    def without(self, surface: str) -> EntitySet:
        """Copy of this set minus one entity, for ablation-style tests."""
        key = surface.casefold()
        return EntitySet(
            entities=tuple(e for e in self.entities if e.dedup_key != key),
            dropped=self.dropped,
        )


def build_entity_set(raw_phrases: Iterable[str]) -> EntitySet:
    """Normalize and deduplicate parser output into an EntitySet.

    Individual phrases that fail normalization are dropped and counted in
    ``EntitySet.dropped`` rather than failing the whole caption: one junk
    line from a parser should not void a 30-entity caption.
    """
    entities: list[Entity] = []
    dropped = 0
    for raw in raw_phrases:
        try:
            entities.append(normalize_entity(raw))
        except NormalizationError:
            dropped += 1
    return EntitySet.from_entities(entities, dropped=dropped)


@dataclass(frozen=True)
class ImageRef:
    """Reference to an image by stable id plus a fetchable URI."""

    id: str
    uri: str
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("image id must be non-empty")
        for name, value in (("width", self.width), ("height", self.height)):
            if value is not None and value <= 0:
                raise DataError(f"image {self.id}: {name} must be positive, got {value}")


@dataclass(frozen=True)
class CaptionSample:
    """One dataset record: an image, its caption, optionally a reference caption."""

    id: str
    image: ImageRef
    caption: str
    reference_caption: str | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("sample id must be non-empty")
        if not self.caption.strip():
            raise DataError(f"sample {self.id}: caption must be non-empty")

    def content_key(self) -> str:
        """Stable hash of everything that affects this sample's score."""
        digest = hashlib.sha256()
        for part in (self.id, self.image.id, self.caption, self.reference_caption or ""):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x1f")
        return digest.hexdigest()


@dataclass(frozen=True)
class Vocabulary:
    """Union of open-vocabulary concept lists.

    Concepts are casefolded and stored sorted so iteration order (and the
    content hash used in config fingerprints) never depends on source file
    order.
    """

    concepts: tuple[str, ...]
    sources: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if list(self.concepts) != sorted(set(self.concepts)):
            raise DataError("Vocabulary concepts must be sorted and unique")

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, concept: str) -> bool:
        return concept.casefold() in set(self.concepts)

    @property
    def content_hash(self) -> str:
        digest = hashlib.sha256("\n".join(self.concepts).encode("utf-8"))
        return digest.hexdigest()


def build_vocabulary(paths: Iterable[str | Path]) -> Vocabulary:
    """Union newline-delimited concept lists into one Vocabulary.

    Lines are casefolded and stripped; blank lines and ``#`` comments are
    skipped. An unreadable file is fatal (named in the error); so is an
    empty union.
    """
    concepts: set[str] = set()
    sources: list[tuple[str, int]] = []
    for path in paths:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read concept list {path}: {exc}") from exc
        count = 0
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            concepts.add(" ".join(line.casefold().split()))
            count += 1
        sources.append((path.name, count))
    if not concepts:
        raise DataError("vocabulary union is empty")
    return Vocabulary(concepts=tuple(sorted(concepts)), sources=tuple(sources))


@dataclass(frozen=True)
class EmbeddingVector:
    """A single fixed-dimension embedding; scoring assumes unit L2 norm."""

    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise DataError(
                f"embedding has {len(self.values)} values but dim={self.dim}"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise DataError("embedding contains non-finite values")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Cosine similarities, references on rows, candidates on columns.

    Values are clamped into [-1, 1] at construction (dot products of unit
    vectors can overshoot by rounding). Either dimension may be zero; the
    degenerate handling lives in the scoring functions.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"similarity matrix must be 2-D, got shape {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise DataError("similarity matrix contains non-finite values")
        arr = np.clip(arr, -1.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FactualityScore:
    """Per-caption factuality result.

    ``degenerate`` marks captions where precision or recall was forced to 0
    by an empty entity set rather than measured (no candidates, or no
    references to recall against).
    """

    precision: float
    recall: float
    f1: float
    reference_mode: ReferenceMode
    candidate_count: int
    grounded_count: int
    reference_count: int
    degenerate: bool = False

    def __post_init__(self):
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            if not (0.0 - _SCORE_EPS <= value <= 1.0 + _SCORE_EPS):
                raise DataError(f"{name} out of [0, 1]: {value}")
        if self.grounded_count > self.candidate_count:
            raise DataError(
                f"grounded_count {self.grounded_count} exceeds "
                f"candidate_count {self.candidate_count}"
            )
        if min(self.candidate_count, self.grounded_count, self.reference_count) < 0:
            raise DataError("entity counts must be non-negative")
        denom = self.precision + self.recall
        expected_f1 = 0.0 if denom == 0.0 else 2.0 * self.precision * self.recall / denom
        if abs(self.f1 - expected_f1) > _SCORE_EPS:
            raise DataError(
                f"f1 {self.f1} inconsistent with precision/recall "
                f"(expected {expected_f1})"
            )

    def as_record(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "reference_mode": self.reference_mode.value,
            "candidate_count": self.candidate_count,
            "grounded_count": self.grounded_count,
            "reference_count": self.reference_count,
            "degenerate": self.degenerate,
        }
