"""Run configuration: file + flag merging, validation, backend wiring.

A run is configured from an optional JSON config file plus command-line
overrides; a flag given on the command line always wins over the file. Every
knob has a package default, so an empty config is a valid (if useless) one.

The config fingerprint identifies everything that can change a score:
thresholds, reference mode, prompt id, clamp behavior, the scorer itself,
the vocabulary content, and the backend identities. Execution-only knobs
(ratio, concurrency, cache directory, output paths, short-circuit batching)
stay out of it so that changing them reuses cached work.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .backends import Backends, load_fixture_backends
from .backends.prompts import DEFAULT_PROMPT_ID, get_prompt
from .backends.remote import (
    RemoteDetector,
    RemoteEmbedder,
    RemoteParser,
    RemoteSegmenter,
)
from .errors import ConfigError, DataError
from .grounding import (
    DETECTION_THRESHOLD_DEFAULT,
    SEGMENTATION_CONFIDENCE_THRESHOLD_DEFAULT,
    SEGMENTATION_MIN_COVERAGE_DEFAULT,
    GroundingConfig,
)
from .model import ReferenceMode, Vocabulary, build_vocabulary
from .pipeline.cache import ScoreCache
from .pipeline.runner import DEFAULT_FAILURE_CEILING
from .pipeline.strategies import SelectionStrategy, StrategyKind
from .scoring import ReferenceSetSpec

METRICS = ("ovfact", "chair", "aloha", "ovf_alm")

# score-command metrics that reuse a selection strategy's scorer
_METRIC_STRATEGY = {
    "ovfact": StrategyKind.OVFACT_F1,
    "aloha": StrategyKind.ALOHA,
    "ovf_alm": StrategyKind.OVF_ALM,
}


@dataclass
class RunConfig:
    # data
    dataset: str | None = None
    out: str | None = None
    # selection
    strategy: str = StrategyKind.OVFACT_F1.value
    ratio: float = 1.0
    seed: int | None = None
    score_file: str | None = None
    lower_is_better: bool = True
    # score-command metric
    metric: str = "ovfact"
    chair_vocab: str | None = None
    # backends: a fixtures directory supplies all four tools; any endpoint
    # given replaces that tool with a remote client
    fixtures_dir: str | None = None
    endpoint_parser: str | None = None
    endpoint_detector: str | None = None
    endpoint_segmenter: str | None = None
    endpoint_embedder: str | None = None
    prompt_id: str = DEFAULT_PROMPT_ID
    # grounding
    detection_threshold: float = DETECTION_THRESHOLD_DEFAULT
    seg_threshold: float = SEGMENTATION_CONFIDENCE_THRESHOLD_DEFAULT
    seg_min_coverage: float = SEGMENTATION_MIN_COVERAGE_DEFAULT
    short_circuit: bool = False
    # references
    ref_mode: str = ReferenceMode.FROM_GT_CAPTION.value
    vocab: tuple[str, ...] = ()
    # execution
    cache_dir: str | None = None
    concurrency: int = 1
    failure_ceiling: float = DEFAULT_FAILURE_CEILING
    clamp_negative: bool = False
    dump_evidence: bool = False

    # -- construction ------------------------------------------------------

    @classmethod
    def field_names(cls) -> frozenset[str]:
        return frozenset(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_sources(
        cls, config_path: str | Path | None, overrides: Mapping[str, Any]
    ) -> "RunConfig":
        """Build a config from an optional JSON file plus overrides.

        Override values of None mean "not given" and leave the file (or
        default) value in place.
        """
        merged: dict[str, Any] = {}
        if config_path is not None:
            merged.update(cls._read_file(config_path))
        known = cls.field_names()
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown config override {key!r}")
            if value is not None:
                merged[key] = value
        if "vocab" in merged:
            vocab = merged["vocab"]
            if isinstance(vocab, str):
                raise ConfigError("vocab must be a list of paths, not a string")
            merged["vocab"] = tuple(str(p) for p in vocab)
        config = cls(**merged)
        config.validate()
        return config

    @classmethod
    def _read_file(cls, config_path: str | Path) -> dict[str, Any]:
        path = Path(config_path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        unknown = sorted(set(raw) - cls.field_names())
        if unknown:
            raise ConfigError(f"config {path} has unknown keys: {', '.join(unknown)}")
        return raw

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        try:
            StrategyKind(self.strategy)
        except ValueError:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; expected one of "
                f"{', '.join(k.value for k in StrategyKind)}"
            ) from None
        if self.metric not in METRICS:
            raise ConfigError(
                f"unknown metric {self.metric!r}; expected one of {', '.join(METRICS)}"
            )
        try:
            ReferenceMode(self.ref_mode)
        except ValueError:
            raise ConfigError(
                f"unknown ref_mode {self.ref_mode!r}; expected one of "
                f"{', '.join(m.value for m in ReferenceMode)}"
            ) from None
        if not (0.0 < self.ratio <= 1.0):
            raise ConfigError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be >= 1, got {self.concurrency}")
        if not (0.0 <= self.failure_ceiling <= 1.0):
            raise ConfigError(
                f"failure_ceiling must be in [0, 1], got {self.failure_ceiling}"
            )
        try:
            self.grounding_config()
        except DataError as exc:
            raise ConfigError(str(exc)) from exc
        get_prompt(self.prompt_id)  # raises ConfigError on unknown ids

    # -- derived pieces ----------------------------------------------------

    def grounding_config(self) -> GroundingConfig:
        return GroundingConfig(
            detection_threshold=self.detection_threshold,
            segmentation_confidence_threshold=self.seg_threshold,
            segmentation_min_coverage=self.seg_min_coverage,
        )

    def reference_mode(self) -> ReferenceMode:
        return ReferenceMode(self.ref_mode)

    def selection_strategy(self) -> SelectionStrategy:
        return SelectionStrategy(
            kind=StrategyKind(self.strategy),
            seed=self.seed,
            score_file=self.score_file,
            lower_is_better=self.lower_is_better,
        )

    def metric_strategy(self) -> SelectionStrategy | None:
        """Strategy whose scorer implements the score-command metric.

        chair has no strategy equivalent; the caller handles it separately.
        """
        kind = _METRIC_STRATEGY.get(self.metric)
        if kind is None:
            return None
        return SelectionStrategy(kind=kind)

    def load_vocabulary(self) -> Vocabulary | None:
        if not self.vocab:
            return None
        return build_vocabulary(self.vocab)

    def reference_spec(self, vocabulary: Vocabulary | None) -> ReferenceSetSpec:
        mode = self.reference_mode()
        if mode is ReferenceMode.FROM_VOCABULARY_GROUNDING and vocabulary is None:
            raise ConfigError(
                "ref_mode from_vocabulary_grounding needs at least one --vocab file"
            )
        if mode is ReferenceMode.FROM_GT_CAPTION:
            return ReferenceSetSpec(mode=mode)
        return ReferenceSetSpec(mode=mode, vocabulary=vocabulary)

    def open_cache(self) -> ScoreCache | None:
        if self.cache_dir is None:
            return None
        return ScoreCache(self.cache_dir)

    # -- backend wiring ----------------------------------------------------

    def build_backends(self) -> Backends:
        base: Backends | None = None
        if self.fixtures_dir is not None:
            base = load_fixture_backends(self.fixtures_dir, prompt_id=self.prompt_id)

        parser = (
            RemoteParser(self.endpoint_parser)
            if self.endpoint_parser
            else (base.parser if base else None)
        )
        detector = (
            RemoteDetector(self.endpoint_detector)
            if self.endpoint_detector
            else (base.detector if base else None)
        )
        segmenter = (
            RemoteSegmenter(self.endpoint_segmenter)
            if self.endpoint_segmenter
            else (base.segmenter if base else None)
        )
        embedder = (
            RemoteEmbedder(self.endpoint_embedder)
            if self.endpoint_embedder
            else (base.embedder if base else None)
        )

        if parser is None or embedder is None:
            missing = [
                name
                for name, tool in (("parser", parser), ("embedder", embedder))
                if tool is None
            ]
            raise ConfigError(
                f"no backend configured for: {', '.join(missing)} "
                "(give --fixtures-dir or the endpoint flags)"
            )
        if detector is None and segmenter is None:
            raise ConfigError(
                "grounding needs a detector or a segmenter "
                "(give --fixtures-dir or an endpoint flag)"
            )
        return Backends(
            parser=parser,
            detector=detector,
            segmenter=segmenter,
            embedder=embedder,
            prompt_id=self.prompt_id,
        )

    # -- fingerprint -------------------------------------------------------

    def fingerprint(
        self,
        *,
        scorer_fields: Mapping[str, Any],
        backends: Backends,
        vocabulary: Vocabulary | None,
    ) -> str:
        return config_fingerprint(
            scorer_fields=scorer_fields,
            backend_identities=backends.identities(),
            vocabulary_hash=vocabulary.content_hash if vocabulary else None,
            detection_threshold=self.detection_threshold,
            seg_threshold=self.seg_threshold,
            seg_min_coverage=self.seg_min_coverage,
            ref_mode=self.ref_mode,
            prompt_id=self.prompt_id,
            clamp_negative=self.clamp_negative,
        )

    def as_record(self) -> dict:
        record = dataclasses.asdict(self)
        record["vocab"] = list(record["vocab"])
        return record


def config_fingerprint(
    *,
    scorer_fields: Mapping[str, Any],
    backend_identities: Mapping[str, str | None],
    vocabulary_hash: str | None,
    detection_threshold: float,
    seg_threshold: float,
    seg_min_coverage: float,
    ref_mode: str,
    prompt_id: str,
    clamp_negative: bool,
) -> str:
    """Hash of everything that can change a sample's score."""
    payload = {
        "backend_identities": dict(backend_identities),
        "clamp_negative": clamp_negative,
        "detection_threshold": detection_threshold,
        "prompt_id": prompt_id,
        "ref_mode": ref_mode,
        "scorer": dict(scorer_fields),
        "seg_min_coverage": seg_min_coverage,
        "seg_threshold": seg_threshold,
        "vocabulary_hash": vocabulary_hash,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
