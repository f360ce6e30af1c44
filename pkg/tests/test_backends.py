"""Backend contract checks: fixtures, remote clients, retry policy.

The remote tests run against a single-purpose HTTP stub on localhost whose
responses are scripted per test, so retry and error paths are exercised
against real request plumbing, not mocks of it.
"""

import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ovfact.backends.base import (
    BackendDescriptor,
    BackendKind,
    DetectionQueryResult,
    ImplKind,
    ParseRequest,
)
from ovfact.backends.fixture import (
    FixtureDetector,
    FixtureEmbedder,
    FixtureParser,
    FixtureSegmenter,
    caption_sha256,
    load_fixture_backends,
)
from ovfact.backends.remote import (
    RemoteDetector,
    RemoteEmbedder,
    RemoteParser,
    RemoteSegmenter,
)
from ovfact.errors import (
    BackendError,
    ConfigError,
    FixtureMissError,
    ProtocolError,
    TransportError,
)
from ovfact.model import ImageRef


class _Script:
    """Scripted responses for the stub server, consumed in order."""

    def __init__(self):
        self.queue = []
        self.requests = []

    def respond(self, path, payload):
        self.requests.append((path, payload))
        if not self.queue:
            return 500, {"error": "script exhausted", "retryable": False}
        return self.queue.pop(0)


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        status, body = self.server.script.respond(self.path, payload)
        data = body if isinstance(body, bytes) else json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.script = _Script()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        yield url, server.script
    finally:
        server.shutdown()
        server.server_close()


class _SleepRecorder:
    def __init__(self):
        self.delays = []

    def __call__(self, seconds):
        self.delays.append(seconds)


IMG = ImageRef(id="img", uri="uri://img")


class TestRemoteClients:
    def test_parser_round_trip(self, stub):
        url, script = stub
        script.queue = [(200, {"entities": [{"surface": "dog"}, {"surface": "red blanket"}]})]
        parser = RemoteParser(url)
        surfaces = parser.parse_caption(ParseRequest(caption="A dog.", prompt_id="p1"))
        assert surfaces == ["dog", "red blanket"]
        assert script.requests == [("/v1/parse", {"caption": "A dog.", "prompt_id": "p1"})]
        assert parser.calls == 1
        assert parser.descriptor.identity.endswith(":greedy")

    def test_detector_sends_queries_and_validates_alignment(self, stub):
        url, script = stub
        script.queue = [
            (
                200,
                {
                    "results": [
                        {"query": "dog", "max_confidence": 0.9},
                        {"query": "sky", "max_confidence": 0.1},
                    ]
                },
            )
        ]
        detector = RemoteDetector(url)
        results = detector.detect(IMG, ["dog", "sky"])
        assert [r.max_confidence for r in results] == [0.9, 0.1]
        assert script.requests[0][1] == {"image_uri": "uri://img", "queries": ["dog", "sky"]}

    def test_misaligned_results_are_a_protocol_error(self, stub):
        url, script = stub
        script.queue = [
            (
                200,
                {
                    "results": [
                        {"query": "sky", "max_confidence": 0.1},
                        {"query": "dog", "max_confidence": 0.9},
                    ]
                },
            )
        ]
        with pytest.raises(ProtocolError, match="misaligned"):
            RemoteDetector(url).detect(IMG, ["dog", "sky"])

    def test_segmenter_round_trip(self, stub):
        url, script = stub
        script.queue = [
            (200, {"results": [{"query": "sky", "confidence": 0.97, "coverage": 0.31}]})
        ]
        results = RemoteSegmenter(url).segment(IMG, ["sky"])
        assert results[0].coverage == pytest.approx(0.31)

    def test_embedder_normalizes_and_checks_dim(self, stub):
        url, script = stub
        script.queue = [(200, {"vectors": [[3.0, 4.0]], "dim": 2})]
        vectors = RemoteEmbedder(url).embed_texts(["dog"])
        assert vectors[0].values == pytest.approx((0.6, 0.8))

        script.queue = [(200, {"vectors": [[1.0, 0.0, 0.0]], "dim": 2})]
        with pytest.raises(ProtocolError, match="disagrees with dim"):
            RemoteEmbedder(url).embed_texts(["dog"])

    def test_zero_vector_is_a_protocol_error(self, stub):
        url, script = stub
        script.queue = [(200, {"vectors": [[0.0, 0.0]], "dim": 2})]
        with pytest.raises(ProtocolError, match="zero vector"):
            RemoteEmbedder(url).embed_texts(["dog"])

    def test_retryable_error_is_retried_with_backoff(self, stub):
        url, script = stub
        script.queue = [
            (503, {"error": "busy", "retryable": True}),
            (503, {"error": "busy", "retryable": True}),
            (200, {"entities": []}),
        ]
        sleep = _SleepRecorder()
        parser = RemoteParser(url, sleep=sleep, backoff_base_s=0.5)
        assert parser.parse_caption(ParseRequest(caption="x", prompt_id="p")) == []
        assert len(script.requests) == 3
        assert sleep.delays == [0.5, 1.0]

    def test_non_retryable_error_fails_immediately(self, stub):
        url, script = stub
        script.queue = [(400, {"error": "bad caption", "retryable": False})]
        with pytest.raises(ProtocolError, match="bad caption"):
            RemoteParser(url, sleep=_SleepRecorder()).parse_caption(
                ParseRequest(caption="x", prompt_id="p")
            )
        assert len(script.requests) == 1

    def test_unstructured_5xx_retries_and_4xx_does_not(self, stub):
        url, script = stub
        script.queue = [(502, b"<html>gateway</html>"), (200, {"entities": []})]
        parser = RemoteParser(url, sleep=_SleepRecorder())
        assert parser.parse_caption(ParseRequest(caption="x", prompt_id="p")) == []
        assert len(script.requests) == 2

        script.queue = [(404, b"not found")]
        with pytest.raises(ProtocolError):
            parser.parse_caption(ParseRequest(caption="y", prompt_id="p"))

    def test_gives_up_after_max_attempts(self, stub):
        url, script = stub
        script.queue = [(503, {"error": "busy", "retryable": True})] * 5
        sleep = _SleepRecorder()
        parser = RemoteParser(url, max_attempts=3, sleep=sleep)
        with pytest.raises(TransportError, match="giving up after 3 attempts"):
            parser.parse_caption(ParseRequest(caption="x", prompt_id="p"))
        assert len(script.requests) == 3
        assert len(sleep.delays) == 2

    def test_non_json_success_body_is_a_protocol_error(self, stub):
        url, script = stub
        script.queue = [(200, b"not json at all")]
        with pytest.raises(ProtocolError, match="not JSON"):
            RemoteParser(url).parse_caption(ParseRequest(caption="x", prompt_id="p"))

    def test_connection_refused_becomes_transport_error(self):
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            dead_port = probe.getsockname()[1]
        parser = RemoteParser(
            f"http://127.0.0.1:{dead_port}", max_attempts=2, sleep=_SleepRecorder()
        )
        with pytest.raises(TransportError):
            parser.parse_caption(ParseRequest(caption="x", prompt_id="p"))

    def test_error_retryability_flags(self):
        assert TransportError("x").retryable is True
        assert BackendError("x").retryable is False
        assert isinstance(TransportError("x"), BackendError)
        assert isinstance(ProtocolError("x"), BackendError)


class TestBaseContracts:
    def test_duplicate_queries_rejected(self):
        detector = FixtureDetector({"img": {"dog": 0.9}})
        with pytest.raises(ValueError, match="duplicate"):
            detector.detect(IMG, ["dog", "dog"])

    def test_empty_queries_rejected(self):
        detector = FixtureDetector({"img": {"dog": 0.9}})
        with pytest.raises(ValueError):
            detector.detect(IMG, [])
        embedder = FixtureEmbedder({"dog": [1.0]})
        with pytest.raises(ValueError):
            embedder.embed_texts([])

    def test_confidence_range_enforced(self):
        with pytest.raises(ProtocolError):
            DetectionQueryResult(query="dog", max_confidence=1.5)

    def test_descriptor_identity_must_be_non_empty(self):
        with pytest.raises(ValueError):
            BackendDescriptor(kind=BackendKind.PARSER, impl=ImplKind.FIXTURE, identity="")


class TestFixtureBackends:
    def test_unknown_caption_is_a_hard_miss(self):
        parser = FixtureParser({caption_sha256("known"): ["dog"]})
        assert parser.parse_caption(ParseRequest(caption="known", prompt_id="p")) == ["dog"]
        with pytest.raises(FixtureMissError):
            parser.parse_caption(ParseRequest(caption="unknown", prompt_id="p"))

    def test_unknown_image_misses_but_absent_query_scores_zero(self):
        detector = FixtureDetector({"img": {"dog": 0.9}})
        results = detector.detect(IMG, ["dog", "unicorn"])
        assert results[1].max_confidence == 0.0
        with pytest.raises(FixtureMissError):
            detector.detect(ImageRef(id="other", uri="other"), ["dog"])

    def test_absent_segment_query_scores_zero_both_fields(self):
        segmenter = FixtureSegmenter({"img": {}})
        result = segmenter.segment(IMG, ["dog"])[0]
        assert result.confidence == 0.0 and result.coverage == 0.0

    def test_unknown_text_is_a_hard_miss(self):
        embedder = FixtureEmbedder({"dog": [1.0, 0.0]})
        with pytest.raises(FixtureMissError, match="unicorn"):
            embedder.embed_texts(["dog", "unicorn"])

    def test_identity_tracks_table_content(self):
        a = FixtureDetector({"img": {"dog": 0.9}})
        b = FixtureDetector({"img": {"dog": 0.9}})
        c = FixtureDetector({"img": {"dog": 0.8}})
        assert a.descriptor.identity == b.descriptor.identity
        assert a.descriptor.identity != c.descriptor.identity
        assert a.descriptor.impl is ImplKind.FIXTURE

    def test_fixture_miss_is_not_retryable(self):
        assert FixtureMissError("x").retryable is False
        assert isinstance(FixtureMissError("x"), BackendError)

    def test_load_from_directory(self, demo_workspace):
        backends = load_fixture_backends(demo_workspace / "fixtures")
        surfaces = backends.parser.parse_caption(
            ParseRequest(
                caption="A dog lies on a red blanket under the sky.",
                prompt_id=backends.prompt_id,
            )
        )
        assert surfaces == ["dog", "red blanket", "sky"]

    def test_missing_fixture_file_is_config_error(self, tmp_path):
        (tmp_path / "parse.jsonl").write_text("")
        with pytest.raises(ConfigError, match="detect.jsonl"):
            load_fixture_backends(tmp_path)
        with pytest.raises(ConfigError):
            load_fixture_backends(tmp_path / "absent")
