"""Model backends: abstract interfaces, fixture replay, and remote clients."""

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
from .fixture import (
    FixtureDetector,
    FixtureEmbedder,
    FixtureParser,
    FixtureSegmenter,
    caption_sha256,
    load_fixture_backends,
)
from .prompts import DEFAULT_PROMPT_ID, get_prompt, known_prompt_ids
from .remote import RemoteDetector, RemoteEmbedder, RemoteParser, RemoteSegmenter

__all__ = [
    "BackendDescriptor",
    "BackendKind",
    "Backends",
    "CaptionParser",
    "DetectionQueryResult",
    "ImplKind",
    "ObjectDetector",
    "ParseRequest",
    "SegmentationQueryResult",
    "Segmenter",
    "TextEmbedder",
    "FixtureDetector",
    "FixtureEmbedder",
    "FixtureParser",
    "FixtureSegmenter",
    "caption_sha256",
    "load_fixture_backends",
    "DEFAULT_PROMPT_ID",
    "get_prompt",
    "known_prompt_ids",
    "RemoteDetector",
    "RemoteEmbedder",
    "RemoteParser",
    "RemoteSegmenter",
]
