"""Cache-through wrappers for the four backend tools.

Each wrapper checks the ScoreCache before delegating; on a miss it calls the
wrapped backend and stores the serialized response. Keys are content hashes
of everything that determines the response (prompt id and caption; image id
and query batch; text batch), namespaced by the wrapped backend's identity,
so switching models or prompts can never replay stale answers.

Call counters on the wrapped backends keep counting real calls only, which
is what the cache-soundness checks assert against.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

from ..backends.base import (
    BackendDescriptor,
    Backends,
    CaptionParser,
    DetectionQueryResult,
    ObjectDetector,
    ParseRequest,
    SegmentationQueryResult,
    Segmenter,
    TextEmbedder,
)
from ..model import EmbeddingVector, ImageRef
from .cache import ScoreCache

_SEP = "\x1f"


def _digest(*parts: str) -> str:
    return hashlib.sha256(_SEP.join(parts).encode("utf-8")).hexdigest()


class CachedParser(CaptionParser):
    def __init__(self, inner: CaptionParser, cache: ScoreCache):
        super().__init__()
        self._inner = inner
        self._cache = cache

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._inner.descriptor

    def _parse(self, request: ParseRequest) -> list[str]:
        key = _digest(request.prompt_id, request.caption)
        identity = self._inner.descriptor.identity
        hit, value = self._cache.lookup(identity, "parse", key)
        if hit:
            return list(value["entities"])
        result = self._inner.parse_caption(request)
        self._cache.store(identity, "parse", key, {"entities": list(result)})
        return result


class CachedDetector(ObjectDetector):
    def __init__(self, inner: ObjectDetector, cache: ScoreCache):
        super().__init__()
        self._inner = inner
        self._cache = cache

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._inner.descriptor

    def _detect(self, image: ImageRef, queries: Sequence[str]) -> list[DetectionQueryResult]:
        key = _digest(image.id, *queries)
        identity = self._inner.descriptor.identity
        hit, value = self._cache.lookup(identity, "detect", key)
        if hit:
            return [
                DetectionQueryResult(query=q, max_confidence=c)
                for q, c in value["results"]
            ]
        results = self._inner.detect(image, queries)
        self._cache.store(
            identity,
            "detect",
            key,
            {"results": [[r.query, r.max_confidence] for r in results]},
        )
        return results


class CachedSegmenter(Segmenter):
    def __init__(self, inner: Segmenter, cache: ScoreCache):
        super().__init__()
        self._inner = inner
        self._cache = cache

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._inner.descriptor

    def _segment(self, image: ImageRef, queries: Sequence[str]) -> list[SegmentationQueryResult]:
        key = _digest(image.id, *queries)
        identity = self._inner.descriptor.identity
        hit, value = self._cache.lookup(identity, "segment", key)
        if hit:
            return [
                SegmentationQueryResult(query=q, confidence=conf, coverage=cov)
                for q, conf, cov in value["results"]
            ]
        results = self._inner.segment(image, queries)
        self._cache.store(
            identity,
            "segment",
            key,
            {"results": [[r.query, r.confidence, r.coverage] for r in results]},
        )
        return results


class CachedEmbedder(TextEmbedder):
    def __init__(self, inner: TextEmbedder, cache: ScoreCache):
        super().__init__()
        self._inner = inner
        self._cache = cache

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._inner.descriptor

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        # Bypass the base-class re-normalization on hits: cached vectors are
        # stored post-normalization and replay exactly.
        if not texts:
            raise ValueError("texts must be non-empty")
        key = _digest(*texts)
        identity = self._inner.descriptor.identity
        hit, value = self._cache.lookup(identity, "embed", key)
        if hit:
            dim = value["dim"]
            return [
                EmbeddingVector(values=tuple(vec), dim=dim) for vec in value["vectors"]
            ]
        result = self._inner.embed_texts(texts)
        self._cache.store(
            identity,
            "embed",
            key,
            {"vectors": [list(v.values) for v in result], "dim": result[0].dim},
        )
        return result

    def _embed(self, texts: Sequence[str]) -> list[Sequence[float]]:  # pragma: no cover
        raise NotImplementedError("embed_texts is overridden directly")


def wrap_backends(backends: Backends, cache: ScoreCache | None) -> Backends:
    """Return a cache-through view of ``backends`` (or the original if no cache)."""
    if cache is None:
        return backends
    return Backends(
        parser=CachedParser(backends.parser, cache),
        detector=CachedDetector(backends.detector, cache) if backends.detector else None,
        segmenter=CachedSegmenter(backends.segmenter, cache) if backends.segmenter else None,
        embedder=CachedEmbedder(backends.embedder, cache),
        prompt_id=backends.prompt_id,
    )
