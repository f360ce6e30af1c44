"""Backend interfaces for the four model tools.

The scoring engine consumes four tools: a caption parser, an open-vocabulary
detector, an open-vocabulary segmenter, and a text embedder. Each exists in
two flavors, a remote HTTP client and a deterministic file-backed fixture
replay, behind the same abstract interface. Response validation and the
embedder's unit-normalization live here so every implementation inherits the
same contract checks.

All backends count their calls (``calls``); the cache-soundness tests assert
a warm rerun performs zero of them.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ..errors import ProtocolError
from ..model import EmbeddingVector, ImageRef

_UNIT_NORM_TOL = 1e-9


class BackendKind(str, Enum):
    PARSER = "parser"
    DETECTOR = "detector"
    SEGMENTER = "segmenter"
    EMBEDDER = "embedder"


class ImplKind(str, Enum):
    REMOTE = "remote"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class BackendDescriptor:
    """Identifies a backend for cache keys and config fingerprints.

    ``identity`` must change whenever responses could change: it names the
    model/version and, for parsers, the decoding settings and prompt id.
    """

    kind: BackendKind
    impl: ImplKind
    identity: str

    def __post_init__(self):
        if not self.identity:
            raise ValueError("backend identity must be non-empty")


@dataclass(frozen=True)
class ParseRequest:
    """One caption to parse into entity phrases under a versioned prompt."""

    caption: str
    prompt_id: str

    def __post_init__(self):
        if not self.caption:
            raise ValueError("caption must be non-empty")
        if not self.prompt_id:
            raise ValueError("prompt_id must be non-empty")


@dataclass(frozen=True)
class DetectionQueryResult:
    """Detector answer for one query: the max box confidence on the image."""

    query: str
    max_confidence: float

    def __post_init__(self):
        if not (0.0 <= self.max_confidence <= 1.0):
            raise ProtocolError(
                f"detector confidence for {self.query!r} out of [0, 1]: "
                f"{self.max_confidence}"
            )


@dataclass(frozen=True)
class SegmentationQueryResult:
    """Segmenter answer for one query: mask confidence and area coverage."""

    query: str
    confidence: float
    coverage: float

    def __post_init__(self):
        for name, value in (("confidence", self.confidence), ("coverage", self.coverage)):
            if not (0.0 <= value <= 1.0):
                raise ProtocolError(
                    f"segmenter {name} for {self.query!r} out of [0, 1]: {value}"
                )


def _check_queries(queries: Sequence[str]) -> None:
    if not queries:
        raise ValueError("queries must be non-empty")
    if len(set(queries)) != len(queries):
        raise ValueError("duplicate queries; deduplicate upstream")


def _check_aligned(queries: Sequence[str], results: Sequence, what: str) -> None:
    if len(results) != len(queries):
        raise ProtocolError(
            f"{what} returned {len(results)} results for {len(queries)} queries"
        )
    for query, result in zip(queries, results):
        if result.query != query:
            raise ProtocolError(
                f"{what} results misaligned: expected {query!r}, got {result.query!r}"
            )


class _CallCounting:
    def __init__(self):
        self.calls = 0
        self._count_lock = threading.Lock()

    def _count_call(self) -> None:
        with self._count_lock:
            self.calls += 1


class CaptionParser(_CallCounting, ABC):
    """Extracts visible-entity phrases from a caption."""

    @property
    @abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    def parse_caption(self, request: ParseRequest) -> list[str]:
        self._count_call()
        return self._parse(request)

    @abstractmethod
    def _parse(self, request: ParseRequest) -> list[str]: ...


class ObjectDetector(_CallCounting, ABC):
    """Open-vocabulary detector queried with free-text phrases."""

    @property
    @abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    def detect(self, image: ImageRef, queries: Sequence[str]) -> list[DetectionQueryResult]:
        _check_queries(queries)
        self._count_call()
        results = self._detect(image, queries)
        _check_aligned(queries, results, "detector")
        return results

    @abstractmethod
    def _detect(self, image: ImageRef, queries: Sequence[str]) -> list[DetectionQueryResult]: ...


class Segmenter(_CallCounting, ABC):
    """Open-vocabulary segmenter queried with free-text phrases."""

    @property
    @abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    def segment(self, image: ImageRef, queries: Sequence[str]) -> list[SegmentationQueryResult]:
        _check_queries(queries)
        self._count_call()
        results = self._segment(image, queries)
        _check_aligned(queries, results, "segmenter")
        return results

    @abstractmethod
    def _segment(self, image: ImageRef, queries: Sequence[str]) -> list[SegmentationQueryResult]: ...


class TextEmbedder(_CallCounting, ABC):
    """Text embedder; vectors are unit-normalized here regardless of source."""

    @property
    @abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be non-empty")
        self._count_call()
        raw = self._embed(texts)
        if len(raw) != len(texts):
            raise ProtocolError(
                f"embedder returned {len(raw)} vectors for {len(texts)} texts"
            )
        return _normalize_vectors(texts, raw)

    @abstractmethod
    def _embed(self, texts: Sequence[str]) -> list[Sequence[float]]: ...


def _normalize_vectors(
    texts: Sequence[str], raw: Sequence[Sequence[float]]
) -> list[EmbeddingVector]:
    dims = {len(v) for v in raw}
    if len(dims) != 1:
        raise ProtocolError(f"embedder returned mixed dimensions: {sorted(dims)}")
    dim = dims.pop()
    if dim == 0:
        raise ProtocolError("embedder returned zero-dimensional vectors")
    out = []
    for text, values in zip(texts, raw):
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ProtocolError(f"embedder returned non-finite vector for {text!r}")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ProtocolError(f"embedder returned a zero vector for {text!r}")
        unit = arr / norm
        renorm = float(np.linalg.norm(unit))
        if abs(renorm - 1.0) > _UNIT_NORM_TOL:
            raise ProtocolError(f"unit normalization failed for {text!r}: norm {renorm}")
        out.append(EmbeddingVector(values=tuple(unit.tolist()), dim=dim))
    return out


@dataclass
class Backends:
    """The four tools a scoring run needs, bundled with the parser prompt id.

    ``segmenter`` may be None to run detector-only grounding (the ablation
    path and the reference-free ALOHa baseline); ``detector`` may be None for
    the mirror-image ablation.
    """

    parser: CaptionParser
    detector: ObjectDetector | None
    segmenter: Segmenter | None
    embedder: TextEmbedder
    prompt_id: str = "entity-extraction-v1"

    def identities(self) -> dict[str, str]:
        out = {
            "parser": self.parser.descriptor.identity,
            "embedder": self.embedder.descriptor.identity,
        }
        out["detector"] = self.detector.descriptor.identity if self.detector else None
        out["segmenter"] = self.segmenter.descriptor.identity if self.segmenter else None
        return out

    def total_calls(self) -> int:
        tools = (self.parser, self.detector, self.segmenter, self.embedder)
        return sum(t.calls for t in tools if t is not None)
