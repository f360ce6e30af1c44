"""Command-line interface.

Subcommands:

- ``score``: score every caption in a dataset with one metric, writing a
  records file, a summary, and optionally per-entity grounding evidence.
- ``filter``: rank a dataset with a selection strategy and write a selection
  manifest for the top fraction.
- ``agreement``: agreement of metric score files with human side-by-side
  judgments, per axis.
- ``vocab``: build or inspect concept vocabularies.
- ``cache``: inspect or clear a score cache directory.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 backend
error, 4 failure ceiling exceeded, 130 interrupted. Usage mistakes are
configuration errors, so they exit 1 as well.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from contextlib import ExitStack
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .agreement import Axis, agreement_breakdown, load_judgments
from .backends import Backends
from .baselines.chair import ClosedVocabulary, chair_i, chair_parse, chair_s, split_sentences
from .config import METRICS, RunConfig, config_fingerprint
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    FailureCeilingExceeded,
    OvfactError,
    UndefinedRateError,
)
from .model import CaptionSample, ReferenceMode, build_vocabulary
from .pipeline import (
    SampleFailure,
    SampleScore,
    ScoreCache,
    SelectionStrategy,
    StrategyKind,
    load_dataset,
    load_external_scores,
    make_scorer,
    score_dataset,
    select_top_fraction,
    wrap_backends,
    write_manifest,
)

_BACKEND_KINDS = frozenset(
    {
        StrategyKind.OVFACT_F1,
        StrategyKind.OVFACT_PRECISION_ONLY,
        StrategyKind.OVFACT_RECALL_ONLY,
        StrategyKind.OVF_ALM,
        StrategyKind.ALOHA,
    }
)
_VOCAB_KINDS = frozenset({StrategyKind.OVF_ALM, StrategyKind.ALOHA})
_OVFACT_SCORER_KINDS = frozenset(
    {
        StrategyKind.OVFACT_F1,
        StrategyKind.OVFACT_PRECISION_ONLY,
        StrategyKind.OVFACT_RECALL_ONLY,
    }
)

# detail fields averaged in summaries when every scored record carries them
_MEAN_DETAIL_FIELDS = ("precision", "recall", "f1", "chair_i", "chair_s")


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors surface as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


# -- argument wiring -------------------------------------------------------


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    """Flags shared by the score and filter commands."""
    _add_config_flag(parser)
    parser.add_argument("--dataset", help="dataset JSONL path")
    parser.add_argument("--out", help="output path (records or manifest)")
    parser.add_argument("--fixtures-dir", help="directory of recorded tool outputs")
    parser.add_argument("--endpoint-parser", help="caption parser service URL")
    parser.add_argument("--endpoint-detector", help="object detector service URL")
    parser.add_argument("--endpoint-segmenter", help="segmenter service URL")
    parser.add_argument("--endpoint-embedder", help="text embedder service URL")
    parser.add_argument("--prompt-id", help="parser prompt template id")
    parser.add_argument("--detection-threshold", type=float)
    parser.add_argument("--seg-threshold", type=float)
    parser.add_argument("--seg-min-coverage", type=float)
    parser.add_argument(
        "--short-circuit",
        action="store_const",
        const=True,
        default=None,
        help="skip segmentation queries for entities the detector accepted",
    )
    parser.add_argument(
        "--ref-mode",
        choices=[m.value for m in ReferenceMode],
        help="where reference entity sets come from",
    )
    parser.add_argument(
        "--vocab",
        action="append",
        metavar="PATH",
        help="concept vocabulary file; repeatable, files are merged",
    )
    parser.add_argument("--cache-dir", help="score cache directory (enables resume)")
    parser.add_argument("--concurrency", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--failure-ceiling", type=float)
    parser.add_argument(
        "--clamp-negative",
        action="store_const",
        const=True,
        default=None,
        help="floor negative similarities at 0 before averaging recall",
    )
    parser.add_argument(
        "--dump-evidence",
        action="store_const",
        const=True,
        default=None,
        help="also write per-entity grounding evidence next to the records",
    )


_RUN_OVERRIDE_FIELDS = (
    "dataset",
    "out",
    "fixtures_dir",
    "endpoint_parser",
    "endpoint_detector",
    "endpoint_segmenter",
    "endpoint_embedder",
    "prompt_id",
    "detection_threshold",
    "seg_threshold",
    "seg_min_coverage",
    "short_circuit",
    "ref_mode",
    "vocab",
    "cache_dir",
    "concurrency",
    "seed",
    "failure_ceiling",
    "clamp_negative",
    "dump_evidence",
    "metric",
    "chair_vocab",
    "strategy",
    "ratio",
    "score_file",
    "lower_is_better",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    values = vars(args)
    overrides = {
        name: values[name] for name in _RUN_OVERRIDE_FIELDS if name in values
    }
    return RunConfig.from_sources(getattr(args, "config", None), overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ovfact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    score = sub.add_parser("score", help="score a dataset")
    _add_run_flags(score)
    score.add_argument("--metric", choices=list(METRICS))
    score.add_argument("--chair-vocab", help="closed vocabulary JSON for --metric chair")
    score.set_defaults(handler=cmd_score)

    filt = sub.add_parser(
        "filter", help="rank a dataset and select a top fraction"
    )
    _add_run_flags(filt)
    filt.add_argument("--strategy", choices=[k.value for k in StrategyKind])
    filt.add_argument("--ratio", type=float, help="fraction of the dataset to keep")
    filt.add_argument("--score-file", help="id<TAB>value file for external_score")
    better = filt.add_mutually_exclusive_group()
    better.add_argument(
        "--lower-is-better",
        dest="lower_is_better",
        action="store_const",
        const=True,
        default=None,
        help="external scores where smaller means better (default)",
    )
    better.add_argument(
        "--higher-is-better",
        dest="lower_is_better",
        action="store_const",
        const=False,
        help="external scores where larger means better",
    )
    filt.set_defaults(handler=cmd_filter)

    agree = sub.add_parser(
        "agreement", help="compare metrics with human judgments"
    )
    agree.add_argument("--judgments", required=True, help="judgments JSONL path")
    agree.add_argument(
        "--scores",
        action="append",
        required=True,
        metavar="MODEL=PATH",
        help="score records file for one judged model; repeatable",
    )
    agree.add_argument("--out", help="also write the report JSON here")
    agree.set_defaults(handler=cmd_agreement)

    vocab = sub.add_parser(
        "vocab", help="build or inspect vocabularies"
    )
    vocab_sub = vocab.add_subparsers(dest="vocab_command", parser_class=_Parser)
    vb = vocab_sub.add_parser("build")
    vb.add_argument("sources", nargs="+", help="concept files, one concept per line")
    vb.add_argument("--out", required=True)
    vb.set_defaults(handler=cmd_vocab_build)
    vs = vocab_sub.add_parser("stats")
    vs.add_argument("sources", nargs="+")
    vs.set_defaults(handler=cmd_vocab_stats)

    cache = sub.add_parser(
        "cache", help="inspect or clear a score cache"
    )
    cache_sub = cache.add_subparsers(dest="cache_command", parser_class=_Parser)
    cs = cache_sub.add_parser("stats")
    cs.add_argument("--cache-dir", required=True)
    cs.set_defaults(handler=cmd_cache_stats)
    cp = cache_sub.add_parser("purge")
    cp.add_argument("--cache-dir", required=True)
    cp.set_defaults(handler=cmd_cache_purge)

    return parser


# -- output helpers --------------------------------------------------------


def _emit(pairs: Sequence[tuple[str, object]]) -> None:
    width = max(len(key) for key, _ in pairs)
    for key, value in pairs:
        print(f"{key.ljust(width)}  {value}")


def _write_json(path: Path, payload: object) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _write_records(
    path: Path, header: Mapping, results: Iterable[SampleScore | SampleFailure]
) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(dict(header), sort_keys=True) + "\n")
        for result in results:
            handle.write(json.dumps(result.as_record(), sort_keys=True) + "\n")
    os.replace(tmp, path)


def _write_evidence(path: Path, results: Iterable[SampleScore | SampleFailure]) -> int:
    count = 0
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as handle:
        for result in results:
            if isinstance(result, SampleScore) and result.evidence:
                for record in result.evidence:
                    handle.write(json.dumps(record, sort_keys=True) + "\n")
                    count += 1
    os.replace(tmp, path)
    return count


def _summarize(
    results: Sequence[SampleScore | SampleFailure],
    *,
    fingerprint: str,
    backends: Backends | None,
    cache: ScoreCache | None,
) -> dict:
    scores = [r for r in results if isinstance(r, SampleScore)]
    failures = [r for r in results if isinstance(r, SampleFailure)]
    by_stage: dict[str, int] = {}
    for failure in failures:
        by_stage[failure.stage] = by_stage.get(failure.stage, 0) + 1
    summary: dict[str, object] = {
        "config_fingerprint": fingerprint,
        "total": len(results),
        "scored": len(scores),
        "failed": len(failures),
        "degenerate": sum(1 for s in scores if s.degenerate),
        "failures_by_stage": by_stage,
    }
    if scores:
        values = [s.score for s in scores]
        summary["score_mean"] = sum(values) / len(values)
        summary["score_min"] = min(values)
        summary["score_max"] = max(values)
        for field in _MEAN_DETAIL_FIELDS:
            if all(
                isinstance(s.detail.get(field), (int, float)) for s in scores
            ):
                summary[f"{field}_mean"] = sum(
                    float(s.detail[field]) for s in scores
                ) / len(scores)
    if backends is not None:
        summary["backend_calls"] = backends.total_calls()
    if cache is not None:
        summary["cache"] = cache.stats()
    return summary


# -- scoring setup shared by score and filter ------------------------------


def _prepare_scorer(
    config: RunConfig,
    strategy: SelectionStrategy,
    cache: ScoreCache | None,
    *,
    collect_evidence: bool,
):
    """Build (scorer, fingerprint, live_backends) for a strategy-backed run.

    live_backends is None for strategies that never call a tool; otherwise
    it is the unwrapped backend set, whose call counters see only real calls
    (cache hits stop at the wrapper).
    """
    kind = strategy.kind
    backends = None
    wrapped = None
    vocabulary = None
    reference_spec = None
    external_scores = None

    if kind in _BACKEND_KINDS:
        backends = config.build_backends()
        wrapped = wrap_backends(backends, cache)
        vocabulary = config.load_vocabulary()
        if kind in _VOCAB_KINDS and vocabulary is None:
            raise ConfigError(
                f"strategy {kind.value} grounds a vocabulary; give --vocab"
            )
        if kind in _OVFACT_SCORER_KINDS:
            reference_spec = config.reference_spec(vocabulary)
    elif kind is StrategyKind.EXTERNAL_SCORE:
        external_scores = load_external_scores(strategy.score_file)

    scorer = make_scorer(
        strategy,
        backends=wrapped,
        reference_spec=reference_spec,
        grounding_config=config.grounding_config(),
        vocabulary=vocabulary,
        short_circuit=config.short_circuit,
        clamp_negative=config.clamp_negative,
        collect_evidence=collect_evidence,
        external_scores=external_scores,
    )
    if backends is not None:
        fingerprint = config.fingerprint(
            scorer_fields=strategy.fingerprint_fields(),
            backends=backends,
            vocabulary=vocabulary,
        )
    else:
        fingerprint = config_fingerprint(
            scorer_fields=strategy.fingerprint_fields(),
            backend_identities={},
            vocabulary_hash=None,
            detection_threshold=config.detection_threshold,
            seg_threshold=config.seg_threshold,
            seg_min_coverage=config.seg_min_coverage,
            ref_mode=config.ref_mode,
            prompt_id=config.prompt_id,
            clamp_negative=config.clamp_negative,
        )
    return scorer, fingerprint, backends


def _chair_scorer(vocabulary: ClosedVocabulary):
    def scorer(sample: CaptionSample) -> SampleScore:
        if sample.reference_caption is None:
            exc = DataError(f"sample {sample.id} has no reference_caption")
            exc.stage = "reference"
            raise exc
        gt_objects = chair_parse(sample.reference_caption, vocabulary)
        mentioned = chair_parse(sample.caption, vocabulary)
        per_sentence = [
            chair_parse(sentence, vocabulary)
            for sentence in split_sentences(sample.caption)
        ]
        gt_keys = {e.dedup_key for e in gt_objects}
        hallucinated = [e.surface for e in mentioned if e.dedup_key not in gt_keys]
        instance_rate = chair_i(mentioned, gt_objects)
        return SampleScore(
            sample_id=sample.id,
            score=instance_rate,
            degenerate=len(mentioned) == 0,
            detail={
                "chair_i": instance_rate,
                "chair_s": chair_s(per_sentence, gt_objects),
                "mentioned": list(mentioned.surfaces),
                "hallucinated": hallucinated,
                "gt_objects": list(gt_objects.surfaces),
            },
        )

    return scorer


def _require(config: RunConfig, field: str) -> str:
    value = getattr(config, field)
    if value is None:
        raise ConfigError(f"--{field.replace('_', '-')} is required")
    return value


# -- commands --------------------------------------------------------------


def cmd_score(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset_path = _require(config, "dataset")
    out = Path(_require(config, "out"))
    samples = load_dataset(dataset_path)

    with ExitStack() as stack:
        cache = config.open_cache()
        if cache is not None:
            stack.enter_context(cache)

        backends = None
        if config.metric == "chair":
            chair_vocab_path = config.chair_vocab
            if chair_vocab_path is None:
                raise ConfigError("--metric chair needs --chair-vocab")
            vocabulary = ClosedVocabulary.from_json(chair_vocab_path)
            scorer = _chair_scorer(vocabulary)
            digest = hashlib.sha256(
                Path(chair_vocab_path).read_bytes()
            ).hexdigest()
            fingerprint = config_fingerprint(
                scorer_fields={"kind": "chair", "chair_vocab_sha256": digest},
                backend_identities={},
                vocabulary_hash=None,
                detection_threshold=config.detection_threshold,
                seg_threshold=config.seg_threshold,
                seg_min_coverage=config.seg_min_coverage,
                ref_mode=config.ref_mode,
                prompt_id=config.prompt_id,
                clamp_negative=config.clamp_negative,
            )
        else:
            strategy = config.metric_strategy()
            assert strategy is not None
            scorer, fingerprint, backends = _prepare_scorer(
                config, strategy, cache, collect_evidence=config.dump_evidence
            )

        results = score_dataset(
            samples,
            scorer,
            fingerprint=fingerprint,
            cache=cache,
            concurrency=config.concurrency,
            failure_ceiling=config.failure_ceiling,
        )

        header = {
            "kind": "header",
            "command": "score",
            "metric": config.metric,
            "config_fingerprint": fingerprint,
            "config": config.as_record(),
        }
        _write_records(out, header, results)
        summary = _summarize(
            results, fingerprint=fingerprint, backends=backends, cache=cache
        )
        summary["metric"] = config.metric
        summary["dataset"] = str(dataset_path)
        summary_path = Path(f"{out}.summary.json")
        _write_json(summary_path, summary)

        pairs: list[tuple[str, object]] = [
            ("metric", config.metric),
            ("samples", summary["total"]),
            ("scored", summary["scored"]),
            ("failed", summary["failed"]),
            ("degenerate", summary["degenerate"]),
        ]
        if "score_mean" in summary:
            pairs.append(("mean score", f"{summary['score_mean']:.6f}"))
        for field in _MEAN_DETAIL_FIELDS:
            key = f"{field}_mean"
            if key in summary:
                pairs.append((f"mean {field}", f"{summary[key]:.6f}"))
        if config.dump_evidence:
            evidence_path = Path(f"{out}.evidence.jsonl")
            count = _write_evidence(evidence_path, results)
            pairs.append(("evidence", f"{evidence_path} ({count} records)"))
        pairs += [
            ("records", str(out)),
            ("summary", str(summary_path)),
            ("fingerprint", fingerprint),
        ]
        _emit(pairs)
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset_path = _require(config, "dataset")
    out = Path(_require(config, "out"))
    samples = load_dataset(dataset_path)
    strategy = config.selection_strategy()

    with ExitStack() as stack:
        cache = config.open_cache()
        if cache is not None:
            stack.enter_context(cache)

        scorer, fingerprint, backends = _prepare_scorer(
            config, strategy, cache, collect_evidence=config.dump_evidence
        )
        results = score_dataset(
            samples,
            scorer,
            fingerprint=fingerprint,
            cache=cache,
            concurrency=config.concurrency,
            failure_ceiling=config.failure_ceiling,
        )
        # failed samples have no score, so they cannot be ranked; the
        # failure ceiling already bounds how many can be missing
        scores = [r for r in results if isinstance(r, SampleScore)]
        manifest = select_top_fraction(scores, config.ratio, strategy, fingerprint)
        write_manifest(manifest, out)

        header = {
            "kind": "header",
            "command": "filter",
            "strategy": strategy.as_record(),
            "data_ratio": config.ratio,
            "config_fingerprint": fingerprint,
            "config": config.as_record(),
        }
        scores_path = Path(f"{out}.scores.jsonl")
        _write_records(scores_path, header, results)
        summary = _summarize(
            results, fingerprint=fingerprint, backends=backends, cache=cache
        )
        summary["strategy"] = strategy.as_record()
        summary["data_ratio"] = config.ratio
        summary["selected"] = len(manifest.selected_ids)
        summary["dataset"] = str(dataset_path)
        summary_path = Path(f"{out}.summary.json")
        _write_json(summary_path, summary)

        pairs = [
            ("strategy", strategy.kind.value),
            ("samples", summary["total"]),
            ("scored", summary["scored"]),
            ("failed", summary["failed"]),
            ("selected", f"{len(manifest.selected_ids)} (ratio {config.ratio})"),
        ]
        if config.dump_evidence:
            evidence_path = Path(f"{out}.evidence.jsonl")
            count = _write_evidence(evidence_path, results)
            pairs.append(("evidence", f"{evidence_path} ({count} records)"))
        pairs += [
            ("manifest", str(out)),
            ("scores", str(scores_path)),
            ("summary", str(summary_path)),
            ("fingerprint", fingerprint),
        ]
        _emit(pairs)
    return 0


def _load_score_records(path: str) -> dict[str, dict]:
    """Read a score records file back as {sample_id: record}."""
    records: dict[str, dict] = {}
    source = Path(path)
    try:
        lines = source.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read scores {source}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{source}:{lineno}: not valid JSON: {exc}") from exc
        if record.get("kind") == "header":
            continue
        if "error" in record:
            continue
        sample_id = record.get("id")
        if not isinstance(sample_id, str):
            raise DataError(f"{source}:{lineno}: record has no sample id")
        if sample_id in records:
            raise DataError(f"{source}:{lineno}: duplicate sample id {sample_id!r}")
        records[sample_id] = record
    if not records:
        raise DataError(f"scores file {source} has no score records")
    return records


# which record field carries each axis's score; records without the
# axis-specific field fall back to the scalar score
_AXIS_FIELDS = {Axis.PRECISION: "precision", Axis.RECALL: "recall"}


def cmd_agreement(args: argparse.Namespace) -> int:
    judgments = load_judgments(args.judgments)
    model_files: dict[str, str] = {}
    for item in args.scores:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"--scores expects MODEL=PATH, got {item!r}")
        if name in model_files:
            raise ConfigError(f"--scores given twice for model {name!r}")
        model_files[name] = path

    records_by_model = {
        name: _load_score_records(path) for name, path in model_files.items()
    }
    report: dict[str, object] = {
        "judgments": args.judgments,
        "models": model_files,
        "judgment_count": len(judgments),
    }
    pairs: list[tuple[str, object]] = [("judgments", len(judgments))]
    for axis in Axis:
        field = _AXIS_FIELDS[axis]
        scores: dict[tuple[str, str], float] = {}
        for name, records in records_by_model.items():
            for sample_id, record in records.items():
                value = record.get(field, record.get("score"))
                if isinstance(value, (int, float)):
                    scores[(sample_id, name)] = float(value)
        try:
            breakdown = agreement_breakdown(judgments, scores, axis)
            report[axis.value] = breakdown.as_record()
            pairs.append(
                (
                    f"{axis.value} agreement",
                    f"{breakdown.rate:.4f} ({breakdown.matched}/{breakdown.considered})",
                )
            )
        except UndefinedRateError as exc:
            report[axis.value] = {"rate": None, "reason": str(exc)}
            pairs.append((f"{axis.value} agreement", f"undefined ({exc})"))
    print(json.dumps(report, sort_keys=True))
    _emit(pairs)
    if args.out:
        _write_json(Path(args.out), report)
    return 0


def cmd_vocab_build(args: argparse.Namespace) -> int:
    vocabulary = build_vocabulary(args.sources)
    out = Path(args.out)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text("\n".join(vocabulary.concepts) + "\n", encoding="utf-8")
    os.replace(tmp, out)
    _emit(
        [
            ("concepts", len(vocabulary.concepts)),
            ("content hash", vocabulary.content_hash),
            ("out", str(out)),
        ]
    )
    return 0


def cmd_vocab_stats(args: argparse.Namespace) -> int:
    vocabulary = build_vocabulary(args.sources)
    print(
        json.dumps(
            {
                "concepts": len(vocabulary.concepts),
                "content_hash": vocabulary.content_hash,
                "sources": list(vocabulary.sources),
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_cache_stats(args: argparse.Namespace) -> int:
    with ScoreCache(args.cache_dir) as cache:
        print(json.dumps(cache.stats(), sort_keys=True))
    return 0


def cmd_cache_purge(args: argparse.Namespace) -> int:
    with ScoreCache(args.cache_dir) as cache:
        removed = cache.purge()
    print(json.dumps({"removed": removed}, sort_keys=True))
    return 0


# -- entry point -----------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = getattr(args, "handler", None)
        if handler is None:
            parser.print_help()
            return 1
        return handler(args)
    except KeyboardInterrupt:
        print("interrupted; checkpoint flushed, rerun to resume", file=sys.stderr)
        return 130
    except FailureCeilingExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OvfactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
