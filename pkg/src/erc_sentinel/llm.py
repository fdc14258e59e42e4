"""Chat-completion access: a provider adapter, a scripted mock, and the shared gateway."""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import httpx
import yaml

from .errors import AuthError, BudgetExceeded, ParseError, TransportError
from .prompts import estimate_tokens

Messages = Sequence[tuple[str, str]]

DEFAULT_KEY_ENV = "ERC_SENTINEL_API_KEY"


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 1.0  # seconds; attempt k waits base * 2**(k-1)

    def delay(self, attempt: int) -> float:
        return self.backoff_base * 2 ** (attempt - 1)


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str | None = None
    model: str = ""
    temperature: float = 0.0
    max_in_flight: int = 4
    input_budget: int = 12000
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    api_key_env: str = DEFAULT_KEY_ENV
    timeout: float = 120.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.input_budget <= 0:
            raise ValueError("input_budget must be positive")
        if self.retry.max_attempts < 1:
            raise ValueError("retry.max_attempts must be >= 1")


@dataclass(frozen=True)
class Reply:
    text: str
    in_tokens: int | None = None  # provider-reported, when available
    out_tokens: int | None = None


class Backend(Protocol):
    def send(self, messages: Messages, config: LlmConfig) -> Reply: ...


# -- scripted mock ---------------------------------------------------------------


@dataclass(frozen=True)
class MockScript:
    entries: tuple[tuple[re.Pattern, str], ...]
    fallback: str = ""

    def respond(self, prompt_text: str) -> str:
        for pattern, response in self.entries:
            if pattern.search(prompt_text):
                return response
        return self.fallback

    def send(self, messages: Messages, config: LlmConfig) -> Reply:
        return Reply(self.respond("\n\n".join(text for _, text in messages)))


def load_mock(text: str) -> MockScript:
    """Parse a mock script.

    The file is a YAML list of ``{match: <regex>, response: <text>}`` items;
    one item may instead be ``{fallback: <text>}``. A mapping with ``script``
    (the list) and ``fallback`` keys is accepted too.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(mark.line + 1 if mark else None, f"invalid YAML: {exc}") from None
    fallback = ""
    if isinstance(doc, dict):
        unknown = set(doc) - {"script", "fallback"}
        if unknown:
            raise ParseError(None, f"unknown key(s) in mock script: {', '.join(sorted(unknown))}")
        fallback = doc.get("fallback", "")
        doc = doc.get("script", [])
    if not isinstance(doc, list):
        raise ParseError(None, "mock script must be a list of {match, response} entries")
    entries = []
    for i, item in enumerate(doc, 1):
        if isinstance(item, dict) and set(item) == {"fallback"}:
            fallback = item["fallback"]
            continue
        if not isinstance(item, dict) or set(item) != {"match", "response"}:
            raise ParseError(None, f"entry {i}: expected keys match and response")
        try:
            pattern = re.compile(str(item["match"]))
        except re.error as exc:
            raise ParseError(None, f"entry {i}: bad regular expression: {exc}") from None
        entries.append((pattern, str(item["response"])))
    if not isinstance(fallback, str):
        raise ParseError(None, "fallback must be text")
    return MockScript(tuple(entries), fallback)


# -- live provider ---------------------------------------------------------------


class ChatCompletionAdapter:
    """Speaks the common chat-completion JSON shape over HTTPS."""

    def __init__(self, config: LlmConfig, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep, environ=os.environ):
        if not config.endpoint:
            raise TransportError("no endpoint configured")
        key = environ.get(config.api_key_env)
        if not key:
            raise AuthError(f"environment variable {config.api_key_env} is not set")
        self._key = key
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep

    def _post(self, payload: dict, config: LlmConfig) -> httpx.Response:
        return self._client.post(
            config.endpoint, json=payload, headers={"Authorization": f"Bearer {self._key}"}
        )

    def send(self, messages: Messages, config: LlmConfig) -> Reply:
        payload = {
            "model": config.model,
            "messages": [{"role": role, "content": text} for role, text in messages],
            "temperature": config.temperature,
        }
        last = "no attempt made"
        for attempt in range(1, config.retry.max_attempts + 1):
            try:
                resp = self._post(payload, config)
            except httpx.TransportError as exc:
                last = f"transport failure: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"provider rejected the API key (HTTP {resp.status_code})")
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    return self._reply(resp)
            if attempt < config.retry.max_attempts:
                self._sleep(config.retry.delay(attempt))
        raise TransportError(f"gave up after {config.retry.max_attempts} attempts ({last})")

    @staticmethod
    def _reply(resp: httpx.Response) -> Reply:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise TransportError("malformed chat-completion response") from None
        usage = body.get("usage") or {}
        return Reply(text or "", usage.get("prompt_tokens"), usage.get("completion_tokens"))


# -- gateway ---------------------------------------------------------------------


@dataclass
class Usage:
    prompts: int = 0
    in_tokens: int = 0
    out_tokens: int = 0


class Gateway:
    """Budget check, concurrency cap, and run ledger in front of a backend.

    Safe to share between threads.
    """

    def __init__(self, backend: Backend, config: LlmConfig | None = None, ledger_path: str | None = None):
        self.backend = backend
        self.config = config or LlmConfig()
        self.ledger_path = ledger_path
        self.usage = Usage()
        self._slots = threading.BoundedSemaphore(self.config.max_in_flight)
        self._lock = threading.Lock()

    @property
    def is_mock(self) -> bool:
        return isinstance(self.backend, MockScript)

    def complete(self, messages: Messages) -> str:
        estimate = sum(estimate_tokens(text) for _, text in messages)
        if estimate > self.config.input_budget:
            raise BudgetExceeded(estimate, self.config.input_budget)
        digest = hashlib.sha256("\n\n".join(t for _, t in messages).encode()).hexdigest()
        with self._slots:
            start = time.monotonic()
            try:
                reply = self.backend.send(messages, self.config)
            except Exception as exc:
                self._record(digest, estimate, 0, start, f"error: {type(exc).__name__}")
                raise
        in_tokens = reply.in_tokens if reply.in_tokens is not None else estimate
        out_tokens = reply.out_tokens if reply.out_tokens is not None else estimate_tokens(reply.text)
        with self._lock:
            self.usage.prompts += 1
            self.usage.in_tokens += in_tokens
            self.usage.out_tokens += out_tokens
        self._record(digest, in_tokens, out_tokens, start, "ok")
        return reply.text

    def _record(self, digest: str, in_tokens: int, out_tokens: int, start: float, outcome: str) -> None:
        if not self.ledger_path:
            return
        entry = {
            "prompt_sha256": digest,
            "in_tokens": in_tokens,
            "out_tokens": out_tokens,
            "ms": round((time.monotonic() - start) * 1000),
            "outcome": outcome,
        }
        with self._lock, open(self.ledger_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")


def mock_gateway(script_text: str, config: LlmConfig | None = None, ledger_path: str | None = None) -> Gateway:
    return Gateway(load_mock(script_text), config, ledger_path)


def live_gateway(config: LlmConfig, ledger_path: str | None = None, **adapter_kwargs) -> Gateway:
    return Gateway(ChatCompletionAdapter(config, **adapter_kwargs), config, ledger_path)
