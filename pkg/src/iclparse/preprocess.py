"""Raw log ingestion: header stripping and deduplication."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .core import LogRecord, normalize, split_template, Template


class BadPattern(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    log_file_path: str
    header_pattern: str = r"(?P<content>.*)"
    ground_truth_path: Optional[str] = None

    def compiled_pattern(self) -> re.Pattern[str]:
        try:
            pattern = re.compile(self.header_pattern)
        except re.error as exc:
            raise BadPattern(f"{self.name}: header pattern does not compile: {exc}") from exc
        if "content" not in pattern.groupindex:
            raise BadPattern(f"{self.name}: header pattern has no named group 'content'")
        return pattern


def load_dataset(config: DatasetConfig) -> list[LogRecord]:
    """Read one LogRecord per line of ``config.log_file_path``.

    Lines where the header pattern does not match keep the whole trimmed
    line as content. Undecodable bytes are replaced. Raises OSError when
    the file cannot be read.
    """
    pattern = config.compiled_pattern()
    records = []
    with open(config.log_file_path, encoding="utf-8", errors="replace") as fh:
        for line_id, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                # blank lines keep their position but produce no record
                continue
            match = pattern.match(line)
            content = match.group("content") if match else None
            content = content.strip() if content else ""
            records.append(LogRecord(line_id, content or line, config.name))
    return records


def deduplicate(records: Iterable[LogRecord]) -> list[LogRecord]:
    seen: set[str] = set()
    out = []
    for rec in records:
        key = normalize(rec.content)
        if key in seen:
            continue
        seen.add(key)
        out.append(rec)
    return out


def load_ground_truth(path: str | Path) -> list[tuple[int, str, Template]]:
    """Read a structured CSV with LineId, Content and EventTemplate columns."""
    rows = []
    with open(path, encoding="utf-8", errors="replace", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"LineId", "Content", "EventTemplate"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            rows.append((int(row["LineId"]), row["Content"], split_template(row["EventTemplate"])))
    return rows
