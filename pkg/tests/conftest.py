"""Shared fixtures: the demo world and a larger synthetic one.

The demo world (ovfact.demodata) has hand-computed expected scores. The
synthetic world built here is for scale properties (determinism, caching,
nestedness) where exact score values don't matter but stability does:
every table is derived from SHA-256 of stable strings, so two builds are
identical across runs, machines, and process restarts.
"""

from __future__ import annotations

import hashlib
import math

import pytest

from ovfact.backends.base import Backends
from ovfact.backends.fixture import (
    FixtureDetector,
    FixtureEmbedder,
    FixtureParser,
    FixtureSegmenter,
    caption_sha256,
)
from ovfact.demodata import DEMO_SAMPLES, demo_backends, write_demo_workspace
from ovfact.model import CaptionSample, ImageRef


def sample_from_record(record: dict) -> CaptionSample:
    return CaptionSample(
        id=record["id"],
        image=ImageRef(id=record["image"], uri=record["image"]),
        caption=record["caption"],
        reference_caption=record.get("reference_caption"),
    )


@pytest.fixture
def demo_samples() -> list[CaptionSample]:
    return [sample_from_record(r) for r in DEMO_SAMPLES]


@pytest.fixture
def backends() -> Backends:
    return demo_backends()


@pytest.fixture
def demo_workspace(tmp_path):
    return write_demo_workspace(tmp_path / "demo")


# -- synthetic world -------------------------------------------------------

_SYN_DIM = 24
_SYN_CONCEPTS = [f"object-{i:02d}" for i in range(40)]


def _digest_floats(tag: str, count: int) -> list[float]:
    """Deterministic floats in [-1, 1] derived from SHA-256(tag)."""
    out: list[float] = []
    block = 0
    while len(out) < count:
        raw = hashlib.sha256(f"{tag}:{block}".encode()).digest()
        for i in range(0, len(raw) - 7, 8):
            out.append(int.from_bytes(raw[i : i + 8], "big") / 2**63 - 1.0)
            if len(out) == count:
                break
        block += 1
    return out


def _syn_vector(concept: str) -> list[float]:
    values = _digest_floats(f"embed:{concept}", _SYN_DIM)
    norm = math.sqrt(sum(v * v for v in values))
    return [v / norm for v in values]


def _pick(tag: str, population: list[str], count: int) -> list[str]:
    """Deterministic sample of `count` items, stable across runs."""
    ranked = sorted(
        population,
        key=lambda item: hashlib.sha256(f"{tag}:{item}".encode()).hexdigest(),
    )
    return ranked[:count]


class SyntheticWorld:
    """A generated dataset plus a factory for fresh fixture backends."""

    def __init__(self, n_samples: int):
        self.samples: list[CaptionSample] = []
        parses: dict[str, list[str]] = {}
        detections: dict[str, dict[str, float]] = {}
        segments: dict[str, dict[str, dict[str, float]]] = {}

        for i in range(n_samples):
            image_id = f"syn-img-{i:04d}"
            scene = _pick(f"scene:{i}", _SYN_CONCEPTS, 4 + i % 3)
            # detector sees most of the scene, segmenter the rest
            det_part = scene[: len(scene) - 1]
            seg_part = scene[len(scene) - 1 :]
            detections[image_id] = {
                concept: 0.35 + (hash_unit(f"conf:{i}:{concept}") * 0.6)
                for concept in det_part
            }
            segments[image_id] = {
                concept: {
                    "confidence": 0.55 + hash_unit(f"segc:{i}:{concept}") * 0.4,
                    "coverage": 0.05 + hash_unit(f"segv:{i}:{concept}") * 0.5,
                }
                for concept in seg_part
            }

            # caption mentions part of the scene plus 0-2 absent concepts
            mentioned = scene[: 2 + i % 3]
            absent_pool = [c for c in _SYN_CONCEPTS if c not in scene]
            hallucinated = _pick(f"halluc:{i}", absent_pool, i % 3)
            caption = f"synthetic scene number {i}"
            reference = f"synthetic reference number {i}"
            parses[caption] = mentioned + hallucinated
            parses[reference] = scene
            self.samples.append(
                CaptionSample(
                    id=f"syn-{i:04d}",
                    image=ImageRef(id=image_id, uri=image_id),
                    caption=caption,
                    reference_caption=reference,
                )
            )

        self._parse_table = {caption_sha256(c): s for c, s in parses.items()}
        self._detect_table = detections
        self._segment_table = segments
        self._embed_table = {c: _syn_vector(c) for c in _SYN_CONCEPTS}

    def fresh_backends(self) -> Backends:
        """New backend instances (zeroed call counters) over shared tables."""
        return Backends(
            parser=FixtureParser(self._parse_table),
            detector=FixtureDetector(self._detect_table),
            segmenter=FixtureSegmenter(self._segment_table),
            embedder=FixtureEmbedder(self._embed_table),
        )


def hash_unit(tag: str) -> float:
    """Deterministic value in [0, 1) from a tag string."""
    raw = hashlib.sha256(tag.encode()).digest()[:8]
    return int.from_bytes(raw, "big") / 2**64


@pytest.fixture(scope="session")
def synthetic_world() -> SyntheticWorld:
    return SyntheticWorld(1000)


@pytest.fixture(scope="session")
def small_synthetic_world() -> SyntheticWorld:
    return SyntheticWorld(40)
