"""Online parsing loop: cache first, LLM with retrieved demonstrations on a miss."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .cache import LruHit, PatternHit, TemplateCache
from .core import LogRecord, ParseResult, split_template, tokenize
from .llm_client import (
    DEFAULT_INSTRUCTION,
    AuthError,
    BackendError,
    UnparseableResponse,
    build_prompt,
    extract_template,
)
from .selector import Bm25Index

logger = logging.getLogger(__name__)


@dataclass
class Timings:
    cache_s: float = 0.0
    llm_s: float = 0.0
    total_s: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {"cache_s": self.cache_s, "llm_s": self.llm_s, "total_s": self.total_s}


@dataclass
class LogParser:
    cache: TemplateCache
    backend: object
    index: Optional[Bm25Index] = None
    shots: int = 5
    ascending: bool = True
    instruction: str = DEFAULT_INSTRUCTION
    timings: Timings = field(default_factory=Timings)
    fallbacks: int = 0

    def parse_one(self, record: LogRecord) -> ParseResult:
        t0 = time.perf_counter()
        outcome = self.cache.lookup(record.content)
        self.timings.cache_s += time.perf_counter() - t0
        if isinstance(outcome, LruHit):
            return ParseResult(record.line_id, record.content, outcome.template, "lru")
        if isinstance(outcome, PatternHit):
            return ParseResult(record.line_id, record.content, outcome.template, "pattern")

        t0 = time.perf_counter()
        demos = []
        if self.index is not None and self.shots > 0:
            hits = self.index.top_k(tokenize(record.content), self.shots, ascending=self.ascending)
            demos = [(rec.content, tmpl.text) for rec, tmpl, _ in hits]
        prompt = build_prompt(demos, record.content, instruction=self.instruction)
        try:
            template = extract_template(self.backend.complete(prompt))
        except AuthError:
            raise
        except (BackendError, UnparseableResponse) as exc:
            self.timings.llm_s += time.perf_counter() - t0
            logger.warning("line %d falls back to its raw content: %s", record.line_id, exc)
            self.fallbacks += 1
            return ParseResult(record.line_id, record.content, split_template(record.content), "fallback")
        self.timings.llm_s += time.perf_counter() - t0

        t0 = time.perf_counter()
        stored = self.cache.insert(record.content, template)
        self.timings.cache_s += time.perf_counter() - t0
        return ParseResult(record.line_id, record.content, stored, "llm")

    def parse(self, records: Iterable[LogRecord]) -> list[ParseResult]:
        start = time.perf_counter()
        results = [self.parse_one(r) for r in records]
        self.timings.total_s += time.perf_counter() - start
        return results


def write_results(results: Sequence[ParseResult], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["LineId", "Content", "EventTemplate", "Source"])
        for r in results:
            writer.writerow([r.line_id, r.content, r.template.text, r.source])
    return path


def read_results(path: str | Path) -> list[ParseResult]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            ParseResult(int(row["LineId"]), row["Content"], split_template(row["EventTemplate"]), row.get("Source") or "")
            for row in csv.DictReader(fh)
        ]
