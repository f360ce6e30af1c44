"""Remote JSON-over-HTTP backend clients.

Wire protocol (all POST, JSON bodies, JSON responses):

- ``/v1/parse``   {"caption", "prompt_id"}   -> {"entities": [{"surface"}, ...]}
- ``/v1/detect``  {"image_uri", "queries"}   -> {"results": [{"query", "max_confidence"}, ...]}
- ``/v1/segment`` {"image_uri", "queries"}   -> {"results": [{"query", "confidence", "coverage"}, ...]}
- ``/v1/embed``   {"texts"}                  -> {"vectors": [[...], ...], "dim": int}

Errors come back non-2xx with body ``{"error": str, "retryable": bool}``.
Retryable failures (and transport-level exceptions) are retried with bounded
exponential backoff; contract violations are not retried.

Result lists must align one-to-one with the query order. The serving side is
expected to decode the parser greedily (temperature zero) so that identical
requests yield identical entity lists; the decoding contract is recorded in
the client's identity string because cached responses are keyed by it.

Clients are shareable across worker threads; ``max_in_flight`` bounds the
number of concurrent requests per client.
"""

from __future__ import annotations

import threading
import time
from typing import Callable, Sequence

import requests

from ..errors import ProtocolError, TransportError
from ..model import ImageRef
from .base import (
    BackendDescriptor,
    BackendKind,
    CaptionParser,
    DetectionQueryResult,
    ImplKind,
    ObjectDetector,
    ParseRequest,
    SegmentationQueryResult,
    Segmenter,
    TextEmbedder,
)

DEFAULT_MAX_ATTEMPTS = 4
DEFAULT_BACKOFF_BASE_S = 0.5
DEFAULT_TIMEOUT_S = 60.0


class _RemoteClient:
    def __init__(
        self,
        base_url: str,
        *,
        identity: str | None,
        kind: BackendKind,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base_s: float = DEFAULT_BACKOFF_BASE_S,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_in_flight: int = 8,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self._base_url = base_url.rstrip("/")
        self._kind = kind
        self._max_attempts = max_attempts
        self._backoff_base_s = backoff_base_s
        self._timeout_s = timeout_s
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(max_in_flight)
        self._sleep = sleep
        self._descriptor = BackendDescriptor(
            kind=kind,
            impl=ImplKind.REMOTE,
            identity=identity or self._default_identity(),
        )

    def _default_identity(self) -> str:
        return f"remote-{self._kind.value}:{self._base_url}"

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self._base_url}{path}"
        last_error: TransportError | None = None
        for attempt in range(self._max_attempts):
            if attempt:
                self._sleep(self._backoff_base_s * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    response = self._session.post(url, json=payload, timeout=self._timeout_s)
            except requests.RequestException as exc:
                last_error = TransportError(f"{url}: {exc}")
                continue
            if 200 <= response.status_code < 300:
                try:
                    body = response.json()
                except ValueError as exc:
                    raise ProtocolError(f"{url}: response is not JSON: {exc}") from exc
                if not isinstance(body, dict):
                    raise ProtocolError(f"{url}: response is not a JSON object")
                return body
            retryable, message = self._parse_error(response)
            if not retryable:
                raise ProtocolError(f"{url}: HTTP {response.status_code}: {message}")
            last_error = TransportError(f"{url}: HTTP {response.status_code}: {message}")
        assert last_error is not None
        raise TransportError(
            f"giving up after {self._max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _parse_error(response: requests.Response) -> tuple[bool, str]:
        try:
            body = response.json()
            return bool(body.get("retryable", False)), str(body.get("error", "unknown error"))
        except ValueError:
            # No structured error body; treat 5xx as transient, 4xx as final.
            return response.status_code >= 500, response.text[:200]


class RemoteParser(_RemoteClient, CaptionParser):
    def __init__(self, base_url: str, *, identity: str | None = None, **kwargs):
        CaptionParser.__init__(self)
        _RemoteClient.__init__(
            self, base_url, identity=identity, kind=BackendKind.PARSER, **kwargs
        )

    def _default_identity(self) -> str:
        # Greedy decoding is part of the request contract, so it is part of
        # the identity that cache keys hang off.
        return f"remote-parser:{self._base_url}:greedy"

    def _parse(self, request: ParseRequest) -> list[str]:
        body = self._post(
            "/v1/parse", {"caption": request.caption, "prompt_id": request.prompt_id}
        )
        try:
            return [str(entry["surface"]) for entry in body["entities"]]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed parse response: {exc}") from exc


class RemoteDetector(_RemoteClient, ObjectDetector):
    def __init__(self, base_url: str, *, identity: str | None = None, **kwargs):
        ObjectDetector.__init__(self)
        _RemoteClient.__init__(
            self, base_url, identity=identity, kind=BackendKind.DETECTOR, **kwargs
        )

    def _detect(self, image: ImageRef, queries: Sequence[str]) -> list[DetectionQueryResult]:
        body = self._post(
            "/v1/detect", {"image_uri": image.uri, "queries": list(queries)}
        )
        try:
            return [
                DetectionQueryResult(
                    query=str(entry["query"]),
                    max_confidence=float(entry["max_confidence"]),
                )
                for entry in body["results"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detect response: {exc}") from exc


class RemoteSegmenter(_RemoteClient, Segmenter):
    def __init__(self, base_url: str, *, identity: str | None = None, **kwargs):
        Segmenter.__init__(self)
        _RemoteClient.__init__(
            self, base_url, identity=identity, kind=BackendKind.SEGMENTER, **kwargs
        )

    def _segment(self, image: ImageRef, queries: Sequence[str]) -> list[SegmentationQueryResult]:
        body = self._post(
            "/v1/segment", {"image_uri": image.uri, "queries": list(queries)}
        )
        try:
            return [
                SegmentationQueryResult(
                    query=str(entry["query"]),
                    confidence=float(entry["confidence"]),
                    coverage=float(entry["coverage"]),
                )
                for entry in body["results"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed segment response: {exc}") from exc


class RemoteEmbedder(_RemoteClient, TextEmbedder):
    def __init__(self, base_url: str, *, identity: str | None = None, **kwargs):
        TextEmbedder.__init__(self)
        _RemoteClient.__init__(
            self, base_url, identity=identity, kind=BackendKind.EMBEDDER, **kwargs
        )

    def _embed(self, texts: Sequence[str]) -> list[Sequence[float]]:
        body = self._post("/v1/embed", {"texts": list(texts)})
        try:
            vectors = [[float(x) for x in vec] for vec in body["vectors"]]
            dim = int(body["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed embed response: {exc}") from exc
        if any(len(vec) != dim for vec in vectors):
            raise ProtocolError("embed response: vector length disagrees with dim")
        return vectors
