"""Prompt construction, LLM backends and template extraction from replies."""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import httpx

from .core import Template, normalize, split_template

logger = logging.getLogger(__name__)

DEFAULT_INSTRUCTION = (
    "You are a log parser. For the last log below, abstract the variables of the log "
    "and output the static template, marking each variable as <*>."
)
CHAT_PATH = "/v1/chat/completions"

_FENCE = re.compile(r"^\s*```.*$", re.MULTILINE)
_ALNUM = re.compile(r"[^\W_]")


class BackendError(RuntimeError):
    pass


class NetworkError(BackendError):
    pass


class AuthError(BackendError):
    pass


class OracleMiss(BackendError):
    pass


class UnparseableResponse(ValueError):
    pass


@dataclass(frozen=True)
class PromptSpec:
    instruction: str
    demonstrations: tuple[tuple[str, str], ...]
    query: str
    shot_count: int

    def __post_init__(self) -> None:
        if len(self.demonstrations) != self.shot_count:
            raise ValueError("shot_count must equal the number of demonstrations")
        if not self.query.strip():
            raise ValueError("query must be non-empty")

    @property
    def text(self) -> str:
        blocks = [self.instruction]
        for log, template in self.demonstrations:
            blocks.append(f"Log: {log}\nTemplate: {template}")
        blocks.append(f"Log: {self.query}\nTemplate:")
        return "\n\n".join(blocks)


def build_prompt(
    demos: Sequence[tuple[str, str]], query: str, instruction: str = DEFAULT_INSTRUCTION
) -> PromptSpec:
    """Lay out the instruction, the demonstrations in the given order, then the query."""
    pairs = tuple((log, template) for log, template in demos)
    return PromptSpec(instruction=instruction, demonstrations=pairs, query=query, shot_count=len(pairs))


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "oracle"  # "http_chat" | "oracle"
    endpoint_url: str = "http://127.0.0.1:8000"
    model_name: str = "qwen2.5-3b-instruct"
    api_key_env_var: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    backoff_base: float = 0.5
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("http_chat", "oracle"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.temperature != 0.0:
            raise ValueError("temperature is fixed at 0.0 for deterministic decoding")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class OracleBackend:
    """Answers with the ground-truth template of the query log."""

    def __init__(self, answers: Mapping[str, str]) -> None:
        self.answers = {normalize(log): template for log, template in answers.items()}

    def complete(self, prompt: PromptSpec) -> str:
        try:
            return self.answers[normalize(prompt.query)]
        except KeyError:
            raise OracleMiss(f"no answer recorded for {prompt.query!r}") from None


class HttpChatBackend:
    """OpenAI-compatible chat-completions client with retry and backoff.

    429, 5xx and transport errors are retried up to ``max_retries`` times
    with exponential backoff; 401/403 fail immediately.
    """

    RETRY_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})

    def __init__(self, config: BackendConfig, client: Optional[httpx.Client] = None, sleep=time.sleep) -> None:
        self.config = config
        self.url = _chat_url(config.endpoint_url)
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def request_body(self, prompt: PromptSpec) -> dict:
        return {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": 0,
        }

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_var, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, prompt: PromptSpec) -> str:
        body = self.request_body(prompt)
        last_error = "no attempt made"
        with self._slots:
            for attempt in range(self.config.max_retries + 1):
                if attempt:
                    self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
                try:
                    resp = self._client.post(self.url, json=body, headers=self._headers())
                except httpx.TransportError as exc:
                    last_error = f"{type(exc).__name__}: {exc}"
                    logger.warning("chat request failed (attempt %d): %s", attempt + 1, last_error)
                    continue
                if resp.status_code in (401, 403):
                    raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
                if resp.status_code in self.RETRY_STATUS:
                    last_error = f"HTTP {resp.status_code}"
                    logger.warning("chat request failed (attempt %d): %s", attempt + 1, last_error)
                    continue
                if resp.status_code >= 400:
                    raise NetworkError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    return resp.json()["choices"][0]["message"]["content"] or ""
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise NetworkError(f"malformed chat completion payload: {exc}") from exc
        raise NetworkError(f"gave up after {self.config.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()


def _chat_url(endpoint: str) -> str:
    endpoint = endpoint.rstrip("/")
    if endpoint.endswith(CHAT_PATH):
        return endpoint
    if endpoint.endswith("/v1"):
        return endpoint + "/chat/completions"
    return endpoint + CHAT_PATH


def make_backend(config: BackendConfig, answers: Optional[Mapping[str, str]] = None):
    if config.kind == "oracle":
        if answers is None:
            raise ValueError("the oracle backend needs an answer table")
        return OracleBackend(answers)
    return HttpChatBackend(config)


def query(backend, prompt: PromptSpec) -> str:
    return backend.complete(prompt)


def extract_template(response: str) -> Template:
    """Pull a template out of a model reply.

    Code fences are dropped, the text after the last ``Template:`` marker is
    preferred, then the first non-empty line is taken, unquoted and
    normalized.
    """
    text = _FENCE.sub("", response or "")
    marker = text.rfind("Template:")
    if marker >= 0:
        text = text[marker + len("Template:"):]
    line = next((ln for ln in text.splitlines() if ln.strip()), "")
    line = line.strip()
    while len(line) >= 2 and line[0] == line[-1] and line[0] in "\"'`":
        line = line[1:-1].strip()
    line = normalize(line)
    if not _ALNUM.search(line):
        raise UnparseableResponse(f"no template found in response {response[:80]!r}")
    return split_template(line)
