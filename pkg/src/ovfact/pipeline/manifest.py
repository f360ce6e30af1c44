"""Selection manifests: the ranked, reproducible outcome of a filtering run.

Ranking sorts by score descending with ties broken by sample id ascending,
so a manifest is a pure function of the score set. The top ceil(ratio * N)
ranks are selected; because ranks are fixed first and the cut moves along
them, selections at increasing ratios nest.

The file is JSONL with one header record (strategy, ratio, fingerprint,
entry count) followed by one record per entry, written atomically via a
temp file so a crashed writer can never leave a half-manifest behind.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from ..errors import ConfigError, DataError
from .records import SampleScore
from .strategies import SelectionStrategy, StrategyKind


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    score: float
    rank: int
    selected: bool


@dataclass(frozen=True)
class SelectionManifest:
    strategy: SelectionStrategy
    data_ratio: float
    entries: tuple[ManifestEntry, ...]
    config_fingerprint: str

    def __post_init__(self):
        if not self.entries:
            raise DataError("manifest has no entries")
        if not (0.0 < self.data_ratio <= 1.0):
            raise ConfigError(f"data ratio must be in (0, 1], got {self.data_ratio}")
        cutoff = selection_count(self.data_ratio, len(self.entries))
        previous: ManifestEntry | None = None
        for position, entry in enumerate(self.entries, start=1):
            if entry.rank != position:
                raise DataError(
                    f"ranks must be 1..N in order; position {position} has rank {entry.rank}"
                )
            if entry.selected != (entry.rank <= cutoff):
                raise DataError(
                    f"entry {entry.sample_id}: selected flag disagrees with rank cutoff"
                )
            if previous is not None:
                if entry.score > previous.score:
                    raise DataError("scores must be non-increasing by rank")
                if entry.score == previous.score and entry.sample_id <= previous.sample_id:
                    raise DataError("tied scores must be ordered by sample id")
            previous = entry

    @property
    def selected_ids(self) -> tuple[str, ...]:
        return tuple(e.sample_id for e in self.entries if e.selected)


def selection_count(ratio: float, total: int) -> int:
    """ceil(ratio * total), reading the ratio by its decimal string.

    0.2 the float is fractionally above 1/5, and a naive float product would
    make ceil(0.2 * 1000) come out 201. Interpreting the ratio through its
    shortest decimal repr gives the count the operator meant.
    """
    return math.ceil(Fraction(str(ratio)) * total)


def select_top_fraction(
    scores: Sequence[SampleScore],
    ratio: float,
    strategy: SelectionStrategy,
    config_fingerprint: str,
) -> SelectionManifest:
    """Rank scored samples and mark the top fraction selected."""
    if not scores:
        raise DataError("no scored samples to select from")
    if not (0.0 < ratio <= 1.0):
        raise ConfigError(f"data ratio must be in (0, 1], got {ratio}")
    ordered = sorted(scores, key=lambda s: (-s.score, s.sample_id))
    cutoff = selection_count(ratio, len(ordered))
    entries = tuple(
        ManifestEntry(
            sample_id=record.sample_id,
            score=record.score,
            rank=position,
            selected=position <= cutoff,
        )
        for position, record in enumerate(ordered, start=1)
    )
    return SelectionManifest(
        strategy=strategy,
        data_ratio=ratio,
        entries=entries,
        config_fingerprint=config_fingerprint,
    )


def write_manifest(manifest: SelectionManifest, path: str | Path) -> None:
    """Write a manifest atomically (temp file + rename)."""
    path = Path(path)
    header = {
        "strategy": manifest.strategy.as_record(),
        "data_ratio": manifest.data_ratio,
        "config_fingerprint": manifest.config_fingerprint,
        "count": len(manifest.entries),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(
        json.dumps(
            {
                "sample_id": e.sample_id,
                "score": e.score,
                "rank": e.rank,
                "selected": e.selected,
            },
            sort_keys=True,
        )
        for e in manifest.entries
    )
    tmp_path = path.with_name(path.name + ".tmp")
    tmp_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp_path, path)


def read_manifest(
    path: str | Path, *, expect_fingerprint: str | None = None
) -> SelectionManifest:
    """Read and validate a manifest; malformed or truncated files are data errors.

    With ``expect_fingerprint``, a manifest produced under a different config
    is still returned but raises a warning, since its scores may not be
    comparable to anything the current config produces.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    if not records:
        raise DataError(f"manifest {path} is empty")
    _, header = records[0]
    try:
        strategy = SelectionStrategy(
            kind=StrategyKind(header["strategy"]["kind"]),
            seed=header["strategy"].get("seed"),
            score_file=header["strategy"].get("score_file"),
            lower_is_better=header["strategy"].get("lower_is_better", True),
        )
        ratio = float(header["data_ratio"])
        fingerprint = str(header["config_fingerprint"])
        count = int(header["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}:1: malformed manifest header: {exc}") from exc
    entries = []
    for lineno, record in records[1:]:
        try:
            entries.append(
                ManifestEntry(
                    sample_id=record["sample_id"],
                    score=float(record["score"]),
                    rank=int(record["rank"]),
                    selected=bool(record["selected"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: malformed manifest entry: {exc}") from exc
    if len(entries) != count:
        raise DataError(
            f"manifest {path} is truncated: header says {count} entries, found {len(entries)}"
        )
    if not entries:
        raise DataError(f"manifest {path} has a header but no entries")
    if expect_fingerprint is not None and fingerprint != expect_fingerprint:
        warnings.warn(
            f"manifest {path} was written under config fingerprint "
            f"{fingerprint[:12]}, current config is {expect_fingerprint[:12]}",
            stacklevel=2,
        )
    return SelectionManifest(
        strategy=strategy,
        data_ratio=ratio,
        entries=tuple(entries),
        config_fingerprint=fingerprint,
    )
