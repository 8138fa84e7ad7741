"""Chat-completion client with caching, retries and rate limiting.

Three backends share one interface:

* ``live-api`` posts to an OpenAI-compatible ``/chat/completions`` endpoint,
* ``replay-cache`` never leaves the machine and fails on a cache miss,
* ``scripted-mock`` answers from a fixed script, for tests and dry runs.

The cache is always consulted first, whatever the backend.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from gecforge.errors import ConfigError, RefusalError, ReplayMissError, TransportError
from gecforge.llm.cache import CacheKey, MemoryCache, ResponseCache, digest_of

log = logging.getLogger(__name__)

BACKENDS = ("live-api", "replay-cache", "scripted-mock")


@dataclass(frozen=True)
class LlmRequest:
    model: str
    system_prompt: str
    user_prompt: str
    demonstrations: tuple[tuple[str, str], ...] = ()
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "demonstrations", tuple((str(i), str(o)) for i, o in self.demonstrations)
        )
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("system and user prompts must be nonempty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def messages(self) -> list[dict]:
        msgs = [{"role": "system", "content": self.system_prompt}]
        for demo_in, demo_out in self.demonstrations:
            msgs.append({"role": "user", "content": demo_in})
            msgs.append({"role": "assistant", "content": demo_out})
        msgs.append({"role": "user", "content": self.user_prompt})
        return msgs

    def keyed_fields(self) -> dict:
        return {
            "model": self.model,
            "system_prompt": self.system_prompt,
            "user_prompt": self.user_prompt,
            "demonstrations": [list(d) for d in self.demonstrations],
            "temperature": float(self.temperature),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class LlmResponse:
    text: str
    model: str
    usage: dict = field(default_factory=dict)
    cached: bool = False


def cache_key(request: LlmRequest) -> CacheKey:
    return CacheKey(digest_of(request.keyed_fields()))


# -- backends -----------------------------------------------------------------


class _Transient(Exception):
    """Retryable transport failure."""


class ScriptedMockBackend:
    """Answers from ``script``.

    ``script`` is a list of completions consumed in order, or a callable
    ``request -> text`` for order-independent answers under concurrency.
    """

    name = "scripted-mock"
    offline = False

    def __init__(self, script: Sequence[str] | Callable[[LlmRequest], str]):
        self._script = script if callable(script) else list(script)
        self._pos = 0
        self._lock = threading.Lock()
        self.calls = 0

    def send(self, request: LlmRequest) -> tuple[str, str, dict]:
        with self._lock:
            self.calls += 1
            if callable(self._script):
                text = self._script(request)
            else:
                if self._pos >= len(self._script):
                    raise TransportError(f"mock script exhausted after {len(self._script)} responses")
                text = self._script[self._pos]
                self._pos += 1
        return text, request.model, {}


class ReplayBackend:
    name = "replay-cache"
    offline = True
    calls = 0

    def send(self, request: LlmRequest):  # pragma: no cover - guarded by LlmClient
        raise ReplayMissError(cache_key(request))


class LiveApiBackend:
    name = "live-api"
    offline = False

    def __init__(self, api_base: str, api_key: str, timeout: float = 120.0, http=None):
        import httpx

        self.url = api_base.rstrip("/") + "/chat/completions"
        self.api_key = api_key
        self._http = http or httpx.Client(timeout=timeout)
        self._httpx = httpx
        self.calls = 0

    def send(self, request: LlmRequest) -> tuple[str, str, dict]:
        payload = {
            "model": request.model,
            "messages": request.messages(),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        self.calls += 1
        try:
            resp = self._http.post(
                self.url, json=payload, headers={"Authorization": f"Bearer {self.api_key}"}
            )
        except self._httpx.TransportError as exc:
            raise _Transient(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        body = resp.text
        if resp.status_code >= 400:
            raise RefusalError(f"provider rejected request (HTTP {resp.status_code})", body)
        try:
            data = resp.json()
            choice = data["choices"][0]
            message = choice["message"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise RefusalError("unexpected response body", body) from None
        if message.get("refusal") or choice.get("finish_reason") == "content_filter":
            raise RefusalError("provider refused to answer", body)
        text = message.get("content")
        if not isinstance(text, str):
            raise RefusalError("response has no text content", body)
        return text, data.get("model", request.model), data.get("usage") or {}


# -- client -------------------------------------------------------------------


class RateLimiter:
    """Global admission control: at most ``rpm`` starts per rolling minute, evenly spaced."""

    def __init__(self, rpm: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / rpm if rpm else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next - now
            self._next = max(now, self._next) + self.interval
        if wait > 0:
            self._sleep(wait)


class LlmClient:
    def __init__(
        self,
        backend,
        cache: ResponseCache | MemoryCache | None = None,
        *,
        max_retries: int = 4,
        backoff: float = 1.0,
        rpm: float | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.cache = cache if cache is not None else MemoryCache()
        self.max_retries = max_retries
        self.backoff = backoff
        self.limiter = RateLimiter(rpm, sleep=sleep)
        self._sleep = sleep
        self._key_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    @property
    def backend_name(self) -> str:
        return self.backend.name

    def _lock_for(self, key: CacheKey) -> threading.Lock:
        with self._locks_guard:
            return self._key_locks.setdefault(key.digest, threading.Lock())

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = cache_key(request)
        with self._lock_for(key):
            entry = self.cache.get(key)
            if entry is not None:
                self.hits += 1
                r = entry["response"]
                return LlmResponse(r["text"], r["model"], r.get("usage", {}), cached=True)
            self.misses += 1
            if self.backend.offline:
                raise ReplayMissError(key)
            text, model, usage = self._send_with_retries(request)
            self.cache.put(
                key,
                {
                    "key": key.digest,
                    "request": request.keyed_fields() | {"max_tokens": request.max_tokens},
                    "response": {"text": text, "model": model, "usage": usage},
                },
            )
            return LlmResponse(text, model, usage, cached=False)

    def _send_with_retries(self, request: LlmRequest):
        attempt = 0
        while True:
            self.limiter.acquire()
            try:
                return self.backend.send(request)
            except _Transient as exc:
                if attempt >= self.max_retries:
                    raise TransportError(f"giving up after {attempt + 1} attempts: {exc}") from exc
                delay = self.backoff * (2 ** attempt)
                log.warning("transient LLM error (%s); retrying in %.1fs", exc, delay)
                self._sleep(delay)
                attempt += 1


def make_client(
    backend: str,
    *,
    cache_dir=None,
    script: Sequence[str] | Callable[[LlmRequest], str] | None = None,
    api_base: str | None = None,
    api_key: str | None = None,
    rpm: float | None = None,
    max_retries: int = 4,
) -> LlmClient:
    """Build a client for one of :data:`BACKENDS`.

    Live credentials fall back to ``GECFORGE_API_BASE`` / ``GECFORGE_API_KEY``.
    """
    cache = ResponseCache(cache_dir) if cache_dir is not None else None
    if backend == "scripted-mock":
        if script is None:
            raise ConfigError("scripted-mock backend needs a script")
        impl = ScriptedMockBackend(script)
    elif backend == "replay-cache":
        if cache is None:
            raise ConfigError("replay-cache backend needs a cache directory")
        impl = ReplayBackend()
    elif backend == "live-api":
        api_base = api_base or os.environ.get("GECFORGE_API_BASE")
        api_key = api_key or os.environ.get("GECFORGE_API_KEY")
        if not api_base or not api_key:
            raise ConfigError("live-api needs GECFORGE_API_BASE and GECFORGE_API_KEY")
        impl = LiveApiBackend(api_base, api_key)
    else:
        raise ConfigError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")
    return LlmClient(impl, cache, rpm=rpm, max_retries=max_retries)


def load_mock_script(path) -> list[str] | Callable[[LlmRequest], str]:
    """Read a mock script file.

    A JSON list is consumed in order. A JSON object ``{"rules": [{"contains":
    ..., "text": ...}], "default": ...}`` answers with the first rule whose
    substring occurs in the user prompt.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"mock script {path} is not JSON: {exc}") from None
    if isinstance(data, list) and all(isinstance(x, str) for x in data):
        return data
    if isinstance(data, dict) and isinstance(data.get("rules", []), list):
        rules = [(r["contains"], r["text"]) for r in data.get("rules", [])]
        default = data.get("default")

        def respond(request: LlmRequest) -> str:
            for needle, text in rules:
                if needle in request.user_prompt:
                    return text
            if default is None:
                raise TransportError("no mock rule matches the request")
            return default

        return respond
    raise ConfigError(f"mock script {path} must be a list of strings or a rules object")
