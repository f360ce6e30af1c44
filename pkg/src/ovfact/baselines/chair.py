"""CHAIR hallucination metrics over a closed vocabulary.

The caption parse here is deliberately primitive: deterministic left-to-right
token matching of vocabulary classes and synonyms, longest match first, each
matched span consumed. That primitiveness is the point of carrying the
baseline: it cannot see attribute-qualified or out-of-vocabulary entities,
which is what the open-vocabulary pipeline exists to fix.

- instance rate: hallucinated mentions / all mentions
- sentence rate: sentences containing at least one hallucinated mention /
  all sentences
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import DataError
from ..model import EntitySet, normalize_entity

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class ClosedVocabulary:
    """Fixed class list plus a synonym-to-class map.

    Everything is casefolded; every synonym must map onto a listed class.
    """

    classes: frozenset[str]
    synonyms: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.classes:
            raise DataError("closed vocabulary has no classes")
        for phrase in self.classes:
            if phrase != " ".join(phrase.casefold().split()) or not phrase:
                raise DataError(f"class not normalized: {phrase!r}")
        for synonym, target in self.synonyms:
            if target not in self.classes:
                raise DataError(
                    f"synonym {synonym!r} maps to unknown class {target!r}"
                )

    @classmethod
    def from_mappings(
        cls, classes: Iterable[str], synonyms: dict[str, str] | None = None
    ) -> ClosedVocabulary:
        norm = lambda s: " ".join(s.casefold().split())
        return cls(
            classes=frozenset(norm(c) for c in classes),
            synonyms=tuple(
                sorted((norm(k), norm(v)) for k, v in (synonyms or {}).items())
            ),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> ClosedVocabulary:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read closed vocabulary {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
        try:
            return cls.from_mappings(raw["classes"], raw.get("synonyms", {}))
        except (KeyError, TypeError, AttributeError) as exc:
            raise DataError(f"{path}: malformed closed vocabulary: {exc}") from exc

    def patterns(self) -> dict[tuple[str, ...], str]:
        """Token-sequence patterns to canonical class, synonyms included."""
        table: dict[tuple[str, ...], str] = {}
        for phrase in self.classes:
            table[tuple(phrase.split())] = phrase
        for synonym, target in self.synonyms:
            table.setdefault(tuple(synonym.split()), target)
        return table


def chair_parse(caption: str, vocabulary: ClosedVocabulary) -> EntitySet:
    """Extract canonical class mentions from a caption.

    Left-to-right over the caption's word tokens; at each position the
    longest matching class or synonym wins and its tokens are consumed, so
    "hot dog" never also yields "dog". Result keeps first-mention order,
    deduplicated.
    """
    tokens = _TOKEN_RE.findall(caption.casefold())
    patterns = vocabulary.patterns()
    max_len = max((len(p) for p in patterns), default=0)
    found: list[str] = []
    position = 0
    while position < len(tokens):
        matched = None
        for length in range(min(max_len, len(tokens) - position), 0, -1):
            window = tuple(tokens[position : position + length])
            if window in patterns:
                matched = (patterns[window], length)
                break
        if matched is None:
            position += 1
        else:
            found.append(matched[0])
            position += matched[1]
    return EntitySet.from_entities(normalize_entity(phrase) for phrase in found)


def split_sentences(caption: str) -> list[str]:
    """Split on sentence terminators (. ! ?) followed by whitespace."""
    parts = _SENTENCE_SPLIT_RE.split(caption.strip())
    return [part for part in (p.strip() for p in parts) if part]


def chair_i(mentioned: EntitySet, gt_objects: EntitySet) -> float:
    """Instance-level hallucination rate; 0.0 when nothing is mentioned."""
    if len(mentioned) == 0:
        return 0.0
    gt_keys = {e.dedup_key for e in gt_objects}
    hallucinated = sum(1 for e in mentioned if e.dedup_key not in gt_keys)
    return hallucinated / len(mentioned)


def chair_s(per_sentence_mentions: Sequence[EntitySet], gt_objects: EntitySet) -> float:
    """Sentence-level hallucination rate; 0.0 when there are no sentences."""
    if not per_sentence_mentions:
        return 0.0
    gt_keys = {e.dedup_key for e in gt_objects}
    bad = sum(
        1
        for mentions in per_sentence_mentions
        if any(e.dedup_key not in gt_keys for e in mentions)
    )
    return bad / len(per_sentence_mentions)
