"""Dataset filtering pipeline: scoring runs, caching, selection manifests."""

from .cache import ScoreCache
from .cached_backends import wrap_backends
from .dataset import iter_dataset, load_dataset
from .manifest import (
    ManifestEntry,
    SelectionManifest,
    read_manifest,
    select_top_fraction,
    selection_count,
    write_manifest,
)
from .records import SampleFailure, SampleScore
from .runner import DEFAULT_FAILURE_CEILING, score_dataset
from .strategies import (
    SelectionStrategy,
    StrategyKind,
    load_external_scores,
    make_scorer,
)

__all__ = [
    "ScoreCache",
    "wrap_backends",
    "iter_dataset",
    "load_dataset",
    "ManifestEntry",
    "SelectionManifest",
    "read_manifest",
    "select_top_fraction",
    "selection_count",
    "write_manifest",
    "SampleFailure",
    "SampleScore",
    "DEFAULT_FAILURE_CEILING",
    "score_dataset",
    "SelectionStrategy",
    "StrategyKind",
    "load_external_scores",
    "make_scorer",
]
