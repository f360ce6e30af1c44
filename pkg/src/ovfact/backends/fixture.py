"""Deterministic fixture backends replaying canned responses from JSONL.

These make whole scoring runs reproducible offline: every backend answer is
looked up by content key instead of computed by a model. Lookup keys:

- parser:    SHA-256 of the exact caption text
- detector:  image id, then query phrase within that image's record
- segmenter: image id, then query phrase within that image's record
- embedder:  exact text

An unknown caption, image, or text is a hard ``FixtureMissError`` so a test
can never pass against an incomplete fixture file. An absent *query* under a
known image is not a miss: the scene simply does not contain that object, and
it scores confidence (and coverage) 0.0.

File formats, one JSON object per line:

- ``parse.jsonl``:   {"caption_sha256": hex, "entities": [{"surface": str}, ...]}
- ``detect.jsonl``:  {"image_id": str, "detections": {query: max_confidence}}
- ``segment.jsonl``: {"image_id": str, "segments": {query: {"confidence": c, "coverage": v}}}
- ``embed.jsonl``:   {"text": str, "vector": [float, ...]}
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

from ..errors import ConfigError, DataError, FixtureMissError
from ..model import ImageRef
from .base import (
    BackendDescriptor,
    BackendKind,
    Backends,
    CaptionParser,
    DetectionQueryResult,
    ImplKind,
    ObjectDetector,
    ParseRequest,
    SegmentationQueryResult,
    Segmenter,
    TextEmbedder,
)
from .prompts import DEFAULT_PROMPT_ID

PARSE_FILE = "parse.jsonl"
DETECT_FILE = "detect.jsonl"
SEGMENT_FILE = "segment.jsonl"
EMBED_FILE = "embed.jsonl"


def caption_sha256(caption: str) -> str:
    return hashlib.sha256(caption.encode("utf-8")).hexdigest()


def _iter_jsonl(path: Path):
    try:
        with path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read fixture file {path}: {exc}") from exc


def _table_identity(kind: str, table: Mapping) -> str:
    digest = hashlib.sha256(
        json.dumps(table, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()
    return f"fixture-{kind}:{digest[:12]}"


class FixtureParser(CaptionParser):
    def __init__(self, entities_by_caption_hash: Mapping[str, Sequence[str]]):
        super().__init__()
        self._table = {k: list(v) for k, v in entities_by_caption_hash.items()}
        self._descriptor = BackendDescriptor(
            kind=BackendKind.PARSER,
            impl=ImplKind.FIXTURE,
            identity=_table_identity("parser", self._table),
        )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> FixtureParser:
        table: dict[str, list[str]] = {}
        for lineno, record in _iter_jsonl(Path(path)):
            try:
                key = record["caption_sha256"]
                surfaces = [entry["surface"] for entry in record["entities"]]
            except (KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed parse fixture: {exc}") from exc
            table[key] = surfaces
        return cls(table)

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def _parse(self, request: ParseRequest) -> list[str]:
        key = caption_sha256(request.caption)
        if key not in self._table:
            raise FixtureMissError(
                f"no parse fixture for caption hash {key} "
                f"(caption starts {request.caption[:40]!r})"
            )
        return list(self._table[key])


class FixtureDetector(ObjectDetector):
    def __init__(self, detections_by_image: Mapping[str, Mapping[str, float]]):
        super().__init__()
        self._table = {k: dict(v) for k, v in detections_by_image.items()}
        self._descriptor = BackendDescriptor(
            kind=BackendKind.DETECTOR,
            impl=ImplKind.FIXTURE,
            identity=_table_identity("detector", self._table),
        )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> FixtureDetector:
        table: dict[str, dict[str, float]] = {}
        for lineno, record in _iter_jsonl(Path(path)):
            try:
                table[record["image_id"]] = {
                    query: float(conf) for query, conf in record["detections"].items()
                }
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed detect fixture: {exc}") from exc
        return cls(table)

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def _detect(self, image: ImageRef, queries: Sequence[str]) -> list[DetectionQueryResult]:
        if image.id not in self._table:
            raise FixtureMissError(f"no detection fixture for image {image.id!r}")
        scene = self._table[image.id]
        return [
            DetectionQueryResult(query=q, max_confidence=scene.get(q, 0.0))
            for q in queries
        ]


class FixtureSegmenter(Segmenter):
    def __init__(self, segments_by_image: Mapping[str, Mapping[str, Mapping[str, float]]]):
        super().__init__()
        self._table = {
            image_id: {q: dict(entry) for q, entry in scene.items()}
            for image_id, scene in segments_by_image.items()
        }
        self._descriptor = BackendDescriptor(
            kind=BackendKind.SEGMENTER,
            impl=ImplKind.FIXTURE,
            identity=_table_identity("segmenter", self._table),
        )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> FixtureSegmenter:
        table: dict[str, dict[str, dict[str, float]]] = {}
        for lineno, record in _iter_jsonl(Path(path)):
            try:
                table[record["image_id"]] = {
                    query: {
                        "confidence": float(entry["confidence"]),
                        "coverage": float(entry["coverage"]),
                    }
                    for query, entry in record["segments"].items()
                }
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed segment fixture: {exc}") from exc
        return cls(table)

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def _segment(self, image: ImageRef, queries: Sequence[str]) -> list[SegmentationQueryResult]:
        if image.id not in self._table:
            raise FixtureMissError(f"no segmentation fixture for image {image.id!r}")
        scene = self._table[image.id]
        results = []
        for query in queries:
            entry = scene.get(query, {"confidence": 0.0, "coverage": 0.0})
            results.append(
                SegmentationQueryResult(
                    query=query,
                    confidence=entry["confidence"],
                    coverage=entry["coverage"],
                )
            )
        return results


class FixtureEmbedder(TextEmbedder):
    def __init__(self, vectors_by_text: Mapping[str, Sequence[float]]):
        super().__init__()
        self._table = {k: [float(x) for x in v] for k, v in vectors_by_text.items()}
        self._descriptor = BackendDescriptor(
            kind=BackendKind.EMBEDDER,
            impl=ImplKind.FIXTURE,
            identity=_table_identity("embedder", self._table),
        )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> FixtureEmbedder:
        table: dict[str, list[float]] = {}
        for lineno, record in _iter_jsonl(Path(path)):
            try:
                table[record["text"]] = [float(x) for x in record["vector"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed embed fixture: {exc}") from exc
        return cls(table)

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def _embed(self, texts: Sequence[str]) -> list[Sequence[float]]:
        missing = [t for t in texts if t not in self._table]
        if missing:
            raise FixtureMissError(f"no embedding fixture for texts {missing!r}")
        return [self._table[t] for t in texts]


def load_fixture_backends(
    fixtures_dir: str | Path, prompt_id: str = DEFAULT_PROMPT_ID
) -> Backends:
    """Load the standard four fixture files from one directory."""
    root = Path(fixtures_dir)
    if not root.is_dir():
        raise ConfigError(f"fixtures directory not found: {root}")
    for name in (PARSE_FILE, DETECT_FILE, SEGMENT_FILE, EMBED_FILE):
        if not (root / name).is_file():
            raise ConfigError(f"fixtures directory {root} is missing {name}")
    return Backends(
        parser=FixtureParser.from_jsonl(root / PARSE_FILE),
        detector=FixtureDetector.from_jsonl(root / DETECT_FILE),
        segmenter=FixtureSegmenter.from_jsonl(root / SEGMENT_FILE),
        embedder=FixtureEmbedder.from_jsonl(root / EMBED_FILE),
        prompt_id=prompt_id,
    )
