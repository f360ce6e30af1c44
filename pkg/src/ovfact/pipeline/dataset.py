"""Dataset input: JSONL caption records.

One JSON object per line: ``{"id", "image", "caption"}`` plus optional
``"reference_caption"``. The image field is either an object
``{"id", "uri", "width", "height"}`` (uri defaults to the id) or a bare
string used as both id and uri. Parse problems are structured data errors
naming the file and line.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

from ..errors import DataError
from ..model import CaptionSample, ImageRef


def _parse_image(raw: object, where: str) -> ImageRef:
    if isinstance(raw, str):
        if not raw:
            raise DataError(f"{where}: image string must be non-empty")
        return ImageRef(id=raw, uri=raw)
    if isinstance(raw, dict):
        try:
            image_id = raw["id"]
        except KeyError:
            raise DataError(f"{where}: image object needs an 'id'") from None
        return ImageRef(
            id=image_id,
            uri=raw.get("uri", image_id),
            width=raw.get("width"),
            height=raw.get("height"),
        )
    raise DataError(f"{where}: image must be a string or object, got {type(raw).__name__}")


def iter_dataset(path: str | Path) -> Iterator[CaptionSample]:
    """Stream samples from a JSONL dataset file."""
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DataError(f"{where}: record must be a JSON object")
            try:
                sample_id = record["id"]
                image_raw = record["image"]
                caption = record["caption"]
            except KeyError as exc:
                raise DataError(f"{where}: missing field {exc}") from None
            try:
                yield CaptionSample(
                    id=sample_id,
                    image=_parse_image(image_raw, where),
                    caption=caption,
                    reference_caption=record.get("reference_caption"),
                )
            except DataError as exc:
                raise DataError(f"{where}: {exc}") from exc


def load_dataset(path: str | Path) -> list[CaptionSample]:
    """Materialize a dataset, enforcing unique sample ids."""
    samples: list[CaptionSample] = []
    seen: set[str] = set()
    for sample in iter_dataset(path):
        if sample.id in seen:
            raise DataError(f"duplicate sample id {sample.id!r} in {path}")
        seen.add(sample.id)
        samples.append(sample)
    if not samples:
        raise DataError(f"dataset {path} has no samples")
    return samples
