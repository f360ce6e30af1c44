"""Streaming dataset scoring with caching, concurrency, and failure limits.

Results are collected by sample id and emitted in dataset order, so the
record stream is byte-identical no matter how many workers ran or how their
completions interleaved. Completed scores are checkpointed into the cache
under an identity derived from the config fingerprint; a rerun (or a resumed
interrupted run) replays them without touching the scoring pipeline at all.
Failures are never checkpointed: transient backend trouble should be retried
on resume.

The failure ceiling is evaluated once, after the full pass, so whether a run
aborts never depends on completion order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

from ..errors import FailureCeilingExceeded, OvfactError
from ..model import CaptionSample
from .cache import ScoreCache
from .records import SampleFailure, SampleScore

DEFAULT_FAILURE_CEILING = 0.01

_SCORER_OP = "score"


def _scorer_identity(fingerprint: str) -> str:
    return f"scorer:{fingerprint}"


def score_dataset(
    samples: Sequence[CaptionSample],
    scorer: Callable[[CaptionSample], SampleScore],
    *,
    fingerprint: str,
    cache: ScoreCache | None = None,
    concurrency: int = 1,
    failure_ceiling: float = DEFAULT_FAILURE_CEILING,
) -> list[SampleScore | SampleFailure]:
    """Score every sample, one record each, in dataset order."""
    if concurrency < 1:
        raise ValueError(f"concurrency must be >= 1, got {concurrency}")
    if not (0.0 <= failure_ceiling <= 1.0):
        raise ValueError(f"failure_ceiling must be in [0, 1], got {failure_ceiling}")

    identity = _scorer_identity(fingerprint)
    results: dict[str, SampleScore | SampleFailure] = {}
    to_compute: list[CaptionSample] = []

    for sample in samples:
        if sample.id in results:
            raise OvfactError(f"duplicate sample id {sample.id!r}")
        if cache is not None:
            hit, value = cache.lookup(identity, _SCORER_OP, sample.content_key())
            if hit:
                results[sample.id] = SampleScore.from_cache_value(sample.id, value)
                continue
        results[sample.id] = None  # type: ignore[assignment]  # reserve slot
        to_compute.append(sample)

    def compute(sample: CaptionSample) -> SampleScore | SampleFailure:
        try:
            score = scorer(sample)
        except OvfactError as exc:
            return SampleFailure(
                sample_id=sample.id,
                stage=getattr(exc, "stage", "score"),
                error=str(exc),
            )
        if cache is not None:
            cache.store(identity, _SCORER_OP, sample.content_key(), score.cache_value())
        return score

    if to_compute:
        if concurrency == 1:
            computed = [compute(sample) for sample in to_compute]
        else:
            with ThreadPoolExecutor(max_workers=concurrency) as pool:
                computed = list(pool.map(compute, to_compute))
        for record in computed:
            results[record.sample_id] = record

    ordered = [results[sample.id] for sample in samples]
    failures = sum(1 for record in ordered if isinstance(record, SampleFailure))
    if ordered and failures / len(ordered) > failure_ceiling:
        raise FailureCeilingExceeded(failures, len(ordered), failure_ceiling)
    return ordered
