"""Provider-agnostic chat-completion client with a file cache.

Requests follow the common chat-completion wire shape::

    POST {base_url}/chat/completions
    {"model": ..., "temperature": ..., "messages": [{"role": "user", "content": ...}]}

and the reply must carry ``choices[0].message.content``; ``usage`` is optional.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import httpx

from ..errors import HttpError, RateLimited, Timeout

logger = logging.getLogger(__name__)

RETRY_STATUS = {429, 500, 502, 503, 504}


def count_tokens_heuristic(text: str) -> int:
    """Rough token estimate: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    source: str = "provider"

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        source = self.source if self.source == other.source else "mixed"
        if not self.total:
            source = other.source
        elif not other.total:
            source = self.source
        return TokenUsage(self.prompt_tokens + other.prompt_tokens,
                          self.completion_tokens + other.completion_tokens, source)


ZERO_USAGE = TokenUsage(0, 0, "none")


@dataclass(frozen=True)
class ChatEndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 4
    api_key_env: str = "OPENAI_API_KEY"
    backoff_base: float = 1.0
    backoff_max: float = 30.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def cache_key(model: str, temperature: float, prompt: str) -> str:
    payload = json.dumps([model, float(temperature), prompt], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON file per request digest. Writes are atomic renames, so a
    reader never sees a partial entry and the last writer wins."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        try:
            return json.loads(self.path(key).read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None

    def put(self, key: str, entry: dict):
        self.directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, self.path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class _Backoff:
    """Backoff window shared by every thread using one client."""

    def __init__(self):
        self._lock = threading.Lock()
        self._not_before = 0.0

    def push(self, delay: float):
        with self._lock:
            self._not_before = max(self._not_before, time.monotonic() + delay)

    def remaining(self) -> float:
        with self._lock:
            return max(0.0, self._not_before - time.monotonic())


class ChatClient:
    """Send single-message chat requests, with caching and bounded retries.

    ``transport`` lets tests (and the stub backend) swap in an in-process
    ``httpx`` transport. ``sleep`` is injectable so retry tests run instantly.
    """

    def __init__(self, config: ChatEndpointConfig, cache_dir=None,
                 transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self._sleep = sleep
        self._backoff = _Backoff()
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(config.api_key_env) if config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(base_url=config.base_url.rstrip("/"), headers=headers,
                                  timeout=config.timeout, transport=transport)
        self.network_calls = 0
        self._count_lock = threading.Lock()

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def invoke(self, prompt: str) -> Tuple[str, TokenUsage]:
        cfg = self.config
        key = cache_key(cfg.model, cfg.temperature, prompt)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                usage = hit.get("usage") or {}
                return hit["reply"], TokenUsage(usage.get("prompt_tokens", 0),
                                                usage.get("completion_tokens", 0),
                                                usage.get("source", "provider"))
        reply, usage = self._request(prompt)
        if self.cache is not None:
            self.cache.put(key, {
                "model": cfg.model,
                "temperature": cfg.temperature,
                "prompt": prompt,
                "reply": reply,
                "usage": {"prompt_tokens": usage.prompt_tokens,
                          "completion_tokens": usage.completion_tokens,
                          "source": usage.source},
                "timestamp": time.time(),
            })
        return reply, usage

    def _request(self, prompt: str) -> Tuple[str, TokenUsage]:
        cfg = self.config
        body = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        attempt = 0
        while True:
            wait = self._backoff.remaining()
            if wait:
                self._sleep(wait)
            with self._count_lock:
                self.network_calls += 1
            try:
                resp = self._http.post("/chat/completions", json=body)
            except httpx.TimeoutException as exc:
                error = Timeout(f"request timed out after {cfg.timeout}s: {exc}")
            except httpx.HTTPError as exc:
                error = HttpError(None, str(exc))
            else:
                if resp.status_code == 200:
                    return self._decode(resp, prompt)
                if resp.status_code == 429:
                    error = RateLimited(resp.text[:200])
                else:
                    error = HttpError(resp.status_code, resp.text[:200])
                if resp.status_code not in RETRY_STATUS:
                    raise error
            if attempt >= cfg.max_retries:
                raise error
            delay = min(cfg.backoff_max, cfg.backoff_base * 2 ** attempt)
            logger.warning("chat request failed (%s); retry %d in %.1fs", error, attempt + 1, delay)
            self._backoff.push(delay)
            attempt += 1

    @staticmethod
    def _decode(resp: httpx.Response, prompt: str) -> Tuple[str, TokenUsage]:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise HttpError(resp.status_code, f"malformed completion payload: {exc}") from None
        if text is None:
            text = ""
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return text, TokenUsage(int(usage["prompt_tokens"]), int(usage["completion_tokens"]),
                                    "provider")
        return text, TokenUsage(count_tokens_heuristic(prompt), count_tokens_heuristic(text),
                                "heuristic")
