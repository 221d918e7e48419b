"""Parsing accuracy (PA) and template precision/recall (PTA/RTA)."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import ParseResult, Template, normalize


class LengthMismatch(ValueError):
    pass


@dataclass
class EvalReport:
    pa: float
    pta: float
    rta: float
    n_correct_templates: int
    n_identified: int
    n_ground_truth: int
    total_lines: int
    timings: dict = field(default_factory=dict)
    cache_stats: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [
            ("PA", f"{self.pa:.4f}"),
            ("PTA", f"{self.pta:.4f}"),
            ("RTA", f"{self.rta:.4f}"),
            ("N_c", str(self.n_correct_templates)),
            ("N_i", str(self.n_identified)),
            ("N_g", str(self.n_ground_truth)),
            ("lines", str(self.total_lines)),
        ]
        rows += [(f"time.{k}", f"{v:.3f}s") for k, v in sorted(self.timings.items())]
        rows += [(f"cache.{k}", str(v)) for k, v in sorted(self.cache_stats.items())]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)


def _check_aligned(results: Sequence[ParseResult], truth: Sequence[Template]) -> None:
    if len(results) != len(truth):
        raise LengthMismatch(f"{len(results)} parsed lines vs {len(truth)} ground-truth lines")


def parsing_accuracy(results: Sequence[ParseResult], truth: Sequence[Template]) -> float:
    _check_aligned(results, truth)
    if not results:
        return 0.0
    correct = sum(normalize(r.template.text) == normalize(t.text) for r, t in zip(results, truth))
    return correct / len(results)


def template_accuracy(
    results: Sequence[ParseResult], truth: Sequence[Template]
) -> tuple[float, float, int, int, int]:
    """Return ``(pta, rta, n_correct, n_identified, n_ground_truth)``.

    A produced template counts as correct only when its text matches a
    ground-truth template and it covers exactly that template's lines.
    """
    _check_aligned(results, truth)
    produced: dict[str, set[int]] = defaultdict(set)
    expected: dict[str, set[int]] = defaultdict(set)
    for r, t in zip(results, truth):
        produced[normalize(r.template.text)].add(r.line_id)
        expected[normalize(t.text)].add(r.line_id)
    n_c = sum(1 for text, lines in produced.items() if expected.get(text) == lines)
    n_i, n_g = len(produced), len(expected)
    pta = n_c / n_i if n_i else 0.0
    rta = n_c / n_g if n_g else 0.0
    return pta, rta, n_c, n_i, n_g


def evaluate(
    results: Sequence[ParseResult],
    truth: Sequence[Template],
    timings: Optional[dict] = None,
    cache_stats: Optional[dict] = None,
) -> EvalReport:
    pa = parsing_accuracy(results, truth)
    pta, rta, n_c, n_i, n_g = template_accuracy(results, truth)
    return EvalReport(pa, pta, rta, n_c, n_i, n_g, len(results), dict(timings or {}), dict(cache_stats or {}))


def write_mismatches(results: Sequence[ParseResult], truth: Sequence[Template], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["LineId", "Content", "Produced", "Truth"])
        for r, t in zip(results, truth):
            if normalize(r.template.text) != normalize(t.text):
                writer.writerow([r.line_id, r.content, r.template.text, t.text])
                count += 1
    return count
