"""A small hand-built demo world with exactly known scores.

Five images, a dozen captions, and a 16-dimensional embedding table chosen
so every similarity is a round number (dot products like 0.2, 0.3, 0.55 by
construction). The same tables back the bundled fixture files, the test
suite's frozen expectations, and the README walkthrough; change anything
here and the expected scores change with it, so don't.

Scene summary:

- img-dog: a dog on grass; sky segments but barely detects, the "red
  blanket" mentioned by the main caption is not there.
- img-house: a house and a path; the mentioned tree is not there, and the
  segmenter has no mask for anything (detector-only scene).
- img-fur: a dog wearing a collar, described by its fur. "brown white fur"
  and "dog collar" embed close (0.55) without sharing a surface form.
- img-dogonly: just a dog; hallucination playground for "dragon".
- img-phone: just a cell phone; "sunglasses" embeds at 0.3 to it, "person"
  at 0.2, which exercises forced low-similarity matching.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .backends.base import Backends
from .backends.fixture import (
    DETECT_FILE,
    EMBED_FILE,
    PARSE_FILE,
    SEGMENT_FILE,
    FixtureDetector,
    FixtureEmbedder,
    FixtureParser,
    FixtureSegmenter,
    caption_sha256,
)

EMBED_DIM = 16

CAPTION_MAIN = "A dog lies on a red blanket under the sky."
REF_MAIN = "A dog sits on grass under a clear sky."
CAPTION_CLEAN = "A dog on grass under the sky."
CAPTION_EMPTY = "There is a calm atmosphere."
REF_EMPTY = "A dog."
CAPTION_HOUSE = "A house by a path under a tree."
REF_HOUSE = "A house by a path."
CAPTION_FUR = "A dog with brown white fur."
REF_FUR = "A dog wearing a dog collar."
CAPTION_SHADES = "A person wearing sunglasses."
CAPTION_DRAGON = "A dog and a dragon."

DEMO_PARSES: dict[str, list[str]] = {
    CAPTION_MAIN: ["dog", "red blanket", "sky"],
    REF_MAIN: ["dog", "grass", "sky"],
    CAPTION_CLEAN: ["dog", "grass", "sky"],
    CAPTION_EMPTY: [],
    REF_EMPTY: ["dog"],
    CAPTION_HOUSE: ["house", "path", "tree"],
    REF_HOUSE: ["house", "path"],
    CAPTION_FUR: ["dog", "brown white fur"],
    REF_FUR: ["dog", "dog collar"],
    CAPTION_SHADES: ["person", "sunglasses"],
    CAPTION_DRAGON: ["dog", "dragon"],
}

DEMO_DETECTIONS: dict[str, dict[str, float]] = {
    "img-dog": {"dog": 0.92, "grass": 0.85, "sky": 0.05, "red blanket": 0.10},
    "img-house": {"house": 0.90, "path": 0.80, "tree": 0.05},
    "img-fur": {"dog": 0.95, "brown white fur": 0.75, "dog collar": 0.70},
    "img-dogonly": {"dog": 0.90},
    "img-phone": {"cell phone": 0.90},
}

DEMO_SEGMENTS: dict[str, dict[str, dict[str, float]]] = {
    "img-dog": {
        "sky": {"confidence": 0.97, "coverage": 0.31},
        "grass": {"confidence": 0.55, "coverage": 0.40},
        "red blanket": {"confidence": 0.10, "coverage": 0.0},
        "dog": {"confidence": 0.20, "coverage": 0.05},
    },
    "img-house": {},
    "img-fur": {},
    "img-dogonly": {},
    "img-phone": {},
}


def _unit(axis: int) -> list[float]:
    vector = [0.0] * EMBED_DIM
    vector[axis] = 1.0
    return vector


def _mix(*terms: tuple[float, int]) -> list[float]:
    vector = [0.0] * EMBED_DIM
    for weight, axis in terms:
        vector[axis] = weight
    return vector


# unit vectors by construction; the chosen axes make each off-diagonal
# similarity below an exact small number (fur x collar = 0.06 + 0.49 = 0.55)
_FUR_COLLAR_SHARE = 0.49 / math.sqrt(0.91)
DEMO_EMBEDDINGS: dict[str, list[float]] = {
    "dog": _unit(0),
    "sky": _unit(1),
    "grass": _unit(2),
    "red blanket": _mix((0.2, 2), (math.sqrt(0.96), 3)),
    "house": _unit(4),
    "path": _unit(5),
    "tree": _unit(6),
    "cell phone": _unit(7),
    "sunglasses": _mix((0.3, 7), (math.sqrt(0.91), 8)),
    "person": _mix((0.2, 7), (math.sqrt(0.96), 9)),
    "dog collar": _mix((0.3, 0), (math.sqrt(0.91), 10)),
    "brown white fur": _mix(
        (0.2, 0),
        (_FUR_COLLAR_SHARE, 10),
        (math.sqrt(1.0 - 0.04 - _FUR_COLLAR_SHARE**2), 11),
    ),
    "dragon": _mix((0.35, 0), (math.sqrt(1.0 - 0.1225), 12)),
    "cat": _unit(13),
    "unicorn": _unit(14),
}

DEMO_VOCAB = ["cat", "dog", "dog collar", "grass", "house", "path", "sky"]

DEMO_CHAIR_CLASSES = [
    "dog",
    "grass",
    "sky",
    "house",
    "path",
    "tree",
    "cat",
    "person",
    "blanket",
    "hot dog",
]
DEMO_CHAIR_SYNONYMS = {"puppy": "dog", "lawn": "grass", "pup": "dog"}

# dataset A: the captions under evaluation
DEMO_SAMPLES: list[dict] = [
    {
        "id": "s1",
        "image": "img-dog",
        "caption": CAPTION_MAIN,
        "reference_caption": REF_MAIN,
    },
    {
        "id": "s2",
        "image": "img-dog",
        "caption": CAPTION_CLEAN,
        "reference_caption": CAPTION_CLEAN,
    },
    {
        "id": "s3",
        "image": "img-dogonly",
        "caption": CAPTION_EMPTY,
        "reference_caption": REF_EMPTY,
    },
    {
        "id": "s4",
        "image": "img-house",
        "caption": CAPTION_HOUSE,
        "reference_caption": REF_HOUSE,
    },
    {
        "id": "s5",
        "image": "img-fur",
        "caption": CAPTION_FUR,
        "reference_caption": REF_FUR,
    },
]

# dataset B: a second model's captions for the same samples, for the
# agreement walkthrough; references stay the same
DEMO_SAMPLES_B: list[dict] = [
    {
        "id": "s1",
        "image": "img-dog",
        "caption": CAPTION_CLEAN,
        "reference_caption": REF_MAIN,
    },
    {
        "id": "s2",
        "image": "img-dog",
        "caption": CAPTION_MAIN,
        "reference_caption": CAPTION_CLEAN,
    },
    {
        "id": "s3",
        "image": "img-dogonly",
        "caption": REF_EMPTY,
        "reference_caption": REF_EMPTY,
    },
    {
        "id": "s4",
        "image": "img-house",
        "caption": REF_HOUSE,
        "reference_caption": REF_HOUSE,
    },
    {
        "id": "s5",
        "image": "img-fur",
        "caption": REF_FUR,
        "reference_caption": REF_FUR,
    },
]

# side-by-side verdicts of model a against model b, two annotators.
# picked so the frozen agreement numbers exercise every code path:
# precision ends 3/3 with one tie excluded, recall 2/3 with one neutral.
DEMO_JUDGMENTS: list[dict] = [
    {"sample_id": "s1", "axis": "precision", "verdict": "b_better", "annotator_id": "ann-1"},
    {"sample_id": "s1", "axis": "recall", "verdict": "b_better", "annotator_id": "ann-1"},
    {"sample_id": "s2", "axis": "precision", "verdict": "a_better", "annotator_id": "ann-2"},
    {"sample_id": "s2", "axis": "recall", "verdict": "a_better", "annotator_id": "ann-2"},
    {"sample_id": "s3", "axis": "precision", "verdict": "b_better", "annotator_id": "ann-1"},
    {"sample_id": "s4", "axis": "recall", "verdict": "neutral", "annotator_id": "ann-2"},
    {"sample_id": "s5", "axis": "precision", "verdict": "a_better", "annotator_id": "ann-1"},
    {"sample_id": "s5", "axis": "recall", "verdict": "a_better", "annotator_id": "ann-2"},
]

# frozen hand-computed scores for dataset A (see tests for the arithmetic)
EXPECTED_MAIN_PRECISION = 2 / 3
EXPECTED_MAIN_RECALL = 2.2 / 3
EXPECTED_MAIN_F1 = 44 / 63
EXPECTED_FUR_RECALL = 0.775
EXPECTED_FUR_F1 = 1.55 / 1.775
EXPECTED_FUR_ALOHA = 0.55
EXPECTED_HOUSE_F1 = 0.8


def demo_backends(prompt_id: str | None = None) -> Backends:
    """In-memory fixture backends over the demo tables."""
    kwargs = {} if prompt_id is None else {"prompt_id": prompt_id}
    return Backends(
        parser=FixtureParser(
            {caption_sha256(c): s for c, s in DEMO_PARSES.items()}
        ),
        detector=FixtureDetector(DEMO_DETECTIONS),
        segmenter=FixtureSegmenter(DEMO_SEGMENTS),
        embedder=FixtureEmbedder(DEMO_EMBEDDINGS),
        **kwargs,
    )


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def write_demo_fixtures(fixtures_dir: str | Path) -> Path:
    """Write the four fixture files for the demo world."""
    root = Path(fixtures_dir)
    root.mkdir(parents=True, exist_ok=True)
    _write_jsonl(
        root / PARSE_FILE,
        [
            {
                "caption_sha256": caption_sha256(caption),
                "entities": [{"surface": s} for s in surfaces],
            }
            for caption, surfaces in DEMO_PARSES.items()
        ],
    )
    _write_jsonl(
        root / DETECT_FILE,
        [
            {"image_id": image_id, "detections": scene}
            for image_id, scene in DEMO_DETECTIONS.items()
        ],
    )
    _write_jsonl(
        root / SEGMENT_FILE,
        [
            {"image_id": image_id, "segments": scene}
            for image_id, scene in DEMO_SEGMENTS.items()
        ],
    )
    _write_jsonl(
        root / EMBED_FILE,
        [{"text": text, "vector": vec} for text, vec in DEMO_EMBEDDINGS.items()],
    )
    return root


def write_demo_workspace(workspace_dir: str | Path) -> Path:
    """Write a complete runnable demo workspace.

    Layout: fixtures/ (four JSONL files), dataset.jsonl, dataset-b.jsonl,
    vocab.txt, chair_vocab.json, judgments.jsonl.
    """
    root = Path(workspace_dir)
    root.mkdir(parents=True, exist_ok=True)
    write_demo_fixtures(root / "fixtures")
    _write_jsonl(root / "dataset.jsonl", DEMO_SAMPLES)
    _write_jsonl(root / "dataset-b.jsonl", DEMO_SAMPLES_B)
    (root / "vocab.txt").write_text(
        "\n".join(DEMO_VOCAB) + "\n", encoding="utf-8"
    )
    (root / "chair_vocab.json").write_text(
        json.dumps(
            {"classes": DEMO_CHAIR_CLASSES, "synonyms": DEMO_CHAIR_SYNONYMS},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    _write_jsonl(
        root / "judgments.jsonl",
        [
            {**record, "model_a": "model-a", "model_b": "model-b"}
            for record in DEMO_JUDGMENTS
        ],
    )
    return root
