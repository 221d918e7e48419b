"""Command-line entry point: sample | emit-train | parse | eval | cache-stats."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .cache import TemplateCache
from .config import ConfigError, RunConfig, load_config
from .core import split_template
from .evaluator import LengthMismatch, evaluate, write_mismatches
from .llm_client import AuthError, make_backend
from .metatrain import TooFewExamples, emit, write_jsonl
from .pipeline import LogParser, read_results, write_results
from .preprocess import BadPattern, DatasetConfig, deduplicate, load_dataset, load_ground_truth
from .sampler import EmptyInput, RatioTooSmall, read_sampled_csv, sample, write_sampled_sets
from .selector import build_index

logger = logging.getLogger("iclparse")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EVAL = 3
EXIT_BACKEND = 4


class InputError(Exception):
    pass


def _truth_by_line(ds: DatasetConfig):
    if not ds.ground_truth_path:
        raise InputError(f"dataset {ds.name} has no ground_truth_path")
    return {line_id: template for line_id, _, template in load_ground_truth(ds.ground_truth_path)}


def _dataset_dir(cfg: RunConfig, ds: DatasetConfig) -> Path:
    return Path(cfg.output_dir) / ds.name


def _require_datasets(cfg: RunConfig) -> tuple[DatasetConfig, ...]:
    if not cfg.datasets:
        raise InputError("no datasets configured (use --config)")
    return cfg.datasets


def cmd_sample(cfg: RunConfig) -> int:
    for ds in _require_datasets(cfg):
        t0 = time.perf_counter()
        records = deduplicate(load_dataset(ds))
        sets = sample(records, cfg.sampler)
        elapsed = time.perf_counter() - t0
        labels = _truth_by_line(ds) if ds.ground_truth_path else None
        paths = write_sampled_sets(
            sets, _dataset_dir(cfg, ds), cfg.sampler, labels=labels,
            extra={"dataset": ds.name, "deduplicated_records": len(records), "sample_s": elapsed},
        )
        print(f"{ds.name}: {len(sets.meta_set)} meta + {len(sets.inference_set)} inference "
              f"from {len(records)} unique logs -> {paths['meta'].parent}")
    return EXIT_OK


def _labeled_set(path: Path, dataset: str):
    if not path.exists():
        raise InputError(f"{path} not found; run `sample` first")
    rows = read_sampled_csv(path, dataset)
    if any(template is None for _, template in rows):
        raise InputError(f"{path} has no EventTemplate column; the sampled sets must be labeled")
    return [(rec, split_template(template)) for rec, template in rows]


def cmd_emit_train(cfg: RunConfig) -> int:
    meta = []
    for ds in _require_datasets(cfg):
        meta.extend(_labeled_set(_dataset_dir(cfg, ds) / "meta_set.csv", ds.name))
    max_shot = cfg.emitter.max_shot if cfg.emitter.max_shot is not None else cfg.selector.shots
    examples = emit(meta, max_shot, cfg.emitter.per_shot_count, seed=cfg.seed, instruction=cfg.instruction)
    path = write_jsonl(examples, Path(cfg.output_dir) / "train.jsonl")
    print(f"wrote {len(examples)} examples (shots 0..{max_shot}) to {path}")
    return EXIT_OK


def cmd_parse(cfg: RunConfig) -> int:
    any_fallback = False
    for ds in _require_datasets(cfg):
        out_dir = _dataset_dir(cfg, ds)
        records = load_dataset(ds)

        answers = None
        if cfg.backend.kind == "oracle":
            truth = _truth_by_line(ds)
            answers = {}
            for rec in records:
                if rec.line_id in truth:
                    answers[rec.content] = truth[rec.line_id].text
        backend = make_backend(cfg.backend, answers)

        index = None
        if cfg.selector.shots > 0:
            candidates = _labeled_set(out_dir / "inference_set.csv", ds.name)
            index = build_index(candidates, k1=cfg.selector.k1, b=cfg.selector.b)

        parser = LogParser(
            cache=TemplateCache(cfg.cache), backend=backend, index=index,
            shots=cfg.selector.shots, ascending=cfg.selector.ascending, instruction=cfg.instruction,
        )
        try:
            results = parser.parse(records)
        finally:
            if hasattr(backend, "close"):
                backend.close()

        write_results(results, out_dir / "parsed.csv")
        parser.cache.save(out_dir / "cache.json")
        counts = {src: 0 for src in ("lru", "pattern", "llm", "fallback")}
        for r in results:
            counts[r.source] += 1
        summary = {
            "dataset": ds.name,
            "lines": len(results),
            "sources": counts,
            "cache_stats": dataclasses.asdict(parser.cache.stats),
            "timings": parser.timings.as_dict(),
        }
        provenance = out_dir / "sample_provenance.json"
        if provenance.exists():
            summary["timings"]["sample_s"] = json.loads(provenance.read_text()).get("sample_s", 0.0)
        (out_dir / "parse_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        hit_rate = parser.cache.stats.hit_rate()
        print(f"{ds.name}: {len(results)} lines, lru={counts['lru']} pattern={counts['pattern']} "
              f"llm={counts['llm']} fallback={counts['fallback']} cache hit rate={hit_rate:.2%}")
        any_fallback = any_fallback or counts["fallback"] > 0
    return EXIT_BACKEND if any_fallback else EXIT_OK


def evaluate_files(parsed_csv: Path, truth_csv: Path, out_dir: Optional[Path] = None):
    results = read_results(parsed_csv)
    truth = {line_id: template for line_id, _, template in load_ground_truth(truth_csv)}
    if len(truth) != len(results) or any(r.line_id not in truth for r in results):
        raise LengthMismatch(f"{parsed_csv} has {len(results)} lines, {truth_csv} has {len(truth)}")
    aligned = [truth[r.line_id] for r in results]

    timings, cache_stats = {}, {}
    summary_path = parsed_csv.parent / "parse_summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        timings, cache_stats = summary.get("timings", {}), summary.get("cache_stats", {})
    report = evaluate(results, aligned, timings=timings, cache_stats=cache_stats)

    out_dir = out_dir or parsed_csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval_report.json").write_text(report.to_json() + "\n")
    (out_dir / "eval_report.txt").write_text(report.table() + "\n")
    write_mismatches(results, aligned, out_dir / "mismatches.csv")
    return report


def cmd_eval(cfg: RunConfig, parsed: Optional[str], truth: Optional[str], output: Optional[str]) -> int:
    if parsed or truth:
        if not (parsed and truth):
            raise InputError("eval needs both PARSED and TRUTH, or neither")
        pairs = [("", Path(parsed), Path(truth))]
        out_dir = Path(output) if output else None
    else:
        # per-dataset reports land next to each parsed.csv
        out_dir = None
        pairs = []
        for ds in _require_datasets(cfg):
            if not ds.ground_truth_path:
                raise InputError(f"dataset {ds.name} has no ground_truth_path")
            pairs.append((ds.name, _dataset_dir(cfg, ds) / "parsed.csv", Path(ds.ground_truth_path)))
    for name, parsed_csv, truth_csv in pairs:
        for p in (parsed_csv, truth_csv):
            if not p.exists():
                raise InputError(f"{p} not found")
        report = evaluate_files(parsed_csv, truth_csv, out_dir)
        if name:
            print(f"== {name}")
        print(report.table())
    return EXIT_OK


def cmd_cache_stats(cfg: RunConfig, snapshots: Sequence[str]) -> int:
    paths = [Path(s) for s in snapshots] or [_dataset_dir(cfg, ds) / "cache.json" for ds in _require_datasets(cfg)]
    for path in paths:
        if not path.exists():
            raise InputError(f"{path} not found")
        cache = TemplateCache.load(path)
        s = cache.stats
        print(f"{path}: patterns={len(cache.patterns)} lru_entries={len(cache.lru)} "
              f"lru_hits={s.lru_hits} pattern_hits={s.pattern_hits} misses={s.misses} "
              f"evictions={s.evictions} hit_rate={s.hit_rate():.2%}")
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--shots", type=int, help="demonstrations per query (also max shot for emit-train)")
    common.add_argument("--backend", choices=("http", "oracle"), help="LLM backend")
    common.add_argument("--output", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="iclparse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="draw meta-training and inference sets")
    sub.add_parser("emit-train", parents=[common], help="write progressive 0..K-shot training data")
    sub.add_parser("parse", parents=[common], help="parse logs through the cache and the LLM")
    ev = sub.add_parser("eval", parents=[common], help="score parsed output against ground truth")
    ev.add_argument("parsed", nargs="?", help="parsed CSV (LineId, Content, EventTemplate, Source)")
    ev.add_argument("truth", nargs="?", help="ground-truth CSV (LineId, Content, EventTemplate)")
    cs = sub.add_parser("cache-stats", parents=[common], help="show counters of saved cache snapshots")
    cs.add_argument("snapshots", nargs="*", help="cache.json files")
    return parser


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["sampler"] = dataclasses.replace(cfg.sampler, seed=args.seed)
    if args.shots is not None:
        changes["selector"] = dataclasses.replace(cfg.selector, shots=args.shots)
        changes["emitter"] = dataclasses.replace(cfg.emitter, max_shot=args.shots)
    if args.backend is not None:
        kind = "http_chat" if args.backend == "http" else "oracle"
        changes["backend"] = dataclasses.replace(cfg.backend, kind=kind)
    if args.output is not None:
        changes["output_dir"] = str(Path(args.output).resolve())
    return dataclasses.replace(cfg, **changes)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "emit-train":
            return cmd_emit_train(cfg)
        if args.command == "parse":
            return cmd_parse(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.parsed, args.truth, args.output)
        return cmd_cache_stats(cfg, args.snapshots)
    except LengthMismatch as exc:
        print(f"error: LengthMismatch: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except AuthError as exc:
        print(f"error: AuthError: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ConfigError, BadPattern, EmptyInput, RatioTooSmall, TooFewExamples, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
