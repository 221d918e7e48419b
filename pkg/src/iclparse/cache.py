"""Two-tier pre-query cache: exact-match LRU over normalized logs plus an
ordered list of template patterns matched structurally."""

from __future__ import annotations

import json
import threading
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from .core import Template, normalize, split_template, tokenize


@dataclass(frozen=True)
class CacheConfig:
    lru_capacity: int = 4096
    token_threshold: int = 128
    # False reproduces the bare ordered-occurrence check without anchoring
    anchored: bool = True

    def __post_init__(self) -> None:
        if self.lru_capacity < 1:
            raise ValueError(f"lru_capacity must be >= 1, got {self.lru_capacity}")
        if self.token_threshold < 1:
            raise ValueError(f"token_threshold must be >= 1, got {self.token_threshold}")


@dataclass
class CacheStats:
    lru_hits: int = 0
    pattern_hits: int = 0
    misses: int = 0
    evictions: int = 0

    @property
    def lookups(self) -> int:
        return self.lru_hits + self.pattern_hits + self.misses

    def hit_rate(self) -> float:
        return (self.lru_hits + self.pattern_hits) / self.lookups if self.lookups else 0.0


@dataclass(frozen=True)
class LruHit:
    template: Template


@dataclass(frozen=True)
class PatternHit:
    template: Template


@dataclass(frozen=True)
class Miss:
    pass


Outcome = Union[LruHit, PatternHit, Miss]


def validate(log_norm: str, pattern: Template, anchored: bool = True) -> bool:
    """Check that the constant segments of ``pattern`` occur in ``log_norm``
    in order at strictly increasing, non-overlapping positions.

    Segments are located greedily left to right. When ``anchored`` is set,
    a pattern that does not start (end) with a wildcard must match at the
    start (end) of the log, and each wildcard must consume at least one
    character. That makes the check equivalent to the regex built by
    replacing every ``<*>`` with ``.+`` and anchoring both ends.
    """
    if not anchored:
        cursor = 0
        for seg in pattern.segments:
            pos = log_norm.find(seg, cursor)
            if pos < 0:
                return False
            cursor = pos + len(seg)
        return True

    # (wildcards immediately before the segment, segment)
    items = []
    gap = 0
    for part in pattern.parts:
        if part:
            items.append((gap, part))
            gap = 0
        gap += 1
    trailing = gap - 1  # wildcards after the last segment

    n = len(log_norm)
    cursor = 0
    last = len(items) - 1
    for i, (gap, seg) in enumerate(items):
        if i == last and trailing == 0:
            pos = n - len(seg)
            if pos < cursor + gap or not log_norm.endswith(seg):
                return False
            if gap == 0 and pos != cursor:
                return False
        elif gap == 0:
            # only the first segment of a pattern without a leading wildcard
            if not log_norm.startswith(seg):
                return False
            pos = 0
        else:
            pos = log_norm.find(seg, cursor + gap)
            if pos < 0:
                return False
        cursor = pos + len(seg)
    return n - cursor >= trailing


class TemplateCache:
    """LRU tier and pattern tier behind one lock.

    The LRU maps ``normalize(raw)`` to a template, most recently used last.
    Patterns are kept in insertion order and scanned first-match-wins.
    """

    def __init__(self, config: Optional[CacheConfig] = None) -> None:
        self.config = config or CacheConfig()
        self.lru: OrderedDict[str, Template] = OrderedDict()
        self.patterns: list[Template] = []
        self._pattern_texts: set[str] = set()
        self.stats = CacheStats()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self.lru)

    def lookup(self, raw: str) -> Outcome:
        key = normalize(raw)
        with self._lock:
            template = self.lru.get(key)
            if template is not None:
                self.lru.move_to_end(key)
                self.stats.lru_hits += 1
                return LruHit(template)
            for pattern in self.patterns:
                if validate(key, pattern, self.config.anchored):
                    self._remember(key, pattern)
                    self.stats.pattern_hits += 1
                    return PatternHit(pattern)
            self.stats.misses += 1
            return Miss()

    def insert(self, raw: str, template: Template) -> Template:
        """Register ``template`` for ``raw``; returns the stored (normalized) template."""
        template = split_template(normalize(template.text) or template.text)
        key = normalize(raw)
        with self._lock:
            if template.text not in self._pattern_texts:
                self._pattern_texts.add(template.text)
                self.patterns.append(template)
            self._remember(key, template)
        return template

    def _remember(self, key: str, template: Template) -> None:
        if tokenize(key).token_count > self.config.token_threshold:
            return
        self.lru[key] = template
        self.lru.move_to_end(key)
        while len(self.lru) > self.config.lru_capacity:
            self.lru.popitem(last=False)
            self.stats.evictions += 1

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "config": asdict(self.config),
                "patterns": [p.text for p in self.patterns],
                "lru_entries": [[k, t.text] for k, t in self.lru.items()],
                "stats": asdict(self.stats),
            }

    @classmethod
    def from_snapshot(cls, data: dict, config: Optional[CacheConfig] = None) -> "TemplateCache":
        cache = cls(config or CacheConfig(**data.get("config", {})))
        for text in data.get("patterns", []):
            template = split_template(text)
            if text not in cache._pattern_texts:
                cache._pattern_texts.add(text)
                cache.patterns.append(template)
        by_text = {p.text: p for p in cache.patterns}
        for key, text in data.get("lru_entries", []):
            template = by_text.get(text)
            if template is None:
                template = split_template(text)
                cache._pattern_texts.add(text)
                cache.patterns.append(template)
                by_text[text] = template
            cache._remember(key, template)
        cache.stats = CacheStats(**data.get("stats", {}))
        return cache

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.snapshot(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TemplateCache":
        return cls.from_snapshot(json.loads(Path(path).read_text(encoding="utf-8")))
