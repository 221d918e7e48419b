"""Shared value types, whitespace tokenization and template handling."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

WILDCARD = "<*>"

_WS_RUN = re.compile(r"\s+")


class EmptyTemplate(ValueError):
    pass


@dataclass(frozen=True)
class LogRecord:
    line_id: int
    content: str
    dataset: str = ""

    def __post_init__(self) -> None:
        if self.line_id < 1:
            raise ValueError(f"line_id must be positive, got {self.line_id}")


@dataclass(frozen=True)
class TokenizedLog:
    tokens: tuple[str, ...]
    token_count: int
    char_length: int


@dataclass(frozen=True)
class Template:
    """A template string whose variable slots are the literal ``<*>``.

    ``parts`` is ``text.split("<*>")``, empty pieces included, so that
    ``"<*>".join(parts) == text``; ``segments`` keeps only the non-empty
    constant pieces in order.
    """

    text: str
    parts: tuple[str, ...] = field(repr=False, compare=False)
    segments: tuple[str, ...] = field(compare=False)

    @property
    def wildcard_count(self) -> int:
        return len(self.parts) - 1

    @property
    def starts_with_wildcard(self) -> bool:
        return self.parts[0] == ""

    @property
    def ends_with_wildcard(self) -> bool:
        return self.parts[-1] == ""

    def __str__(self) -> str:
        return self.text


def tokenize(content: str) -> TokenizedLog:
    tokens = tuple(content.split())
    return TokenizedLog(tokens=tokens, token_count=len(tokens), char_length=len(content))


def normalize(raw: str) -> str:
    """Trim and collapse every internal whitespace run to a single space."""
    return _WS_RUN.sub(" ", raw).strip()


def split_template(text: str) -> Template:
    if not text:
        raise EmptyTemplate("template text is empty")
    parts = tuple(text.split(WILDCARD))
    return Template(text=text, parts=parts, segments=tuple(p for p in parts if p))


SOURCES = ("lru", "pattern", "llm", "fallback")


@dataclass(frozen=True)
class ParseResult:
    line_id: int
    content: str
    template: Template
    source: str  # one of SOURCES
