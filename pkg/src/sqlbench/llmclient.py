"""Chat-completion client with disk caching, retries and answer extraction."""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .errors import ConfigError, EndpointError, ExtractionError, TransportError
from .prompts import COMPLETION_AFTER_SELECT, FREE_SQL, RenderedPrompt

DEFAULT_MAX_TOKENS = 1024
DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRIES = 3
_BACKOFF_BASE = 0.5


@dataclass(frozen=True)
class ModelEndpointConfig:
    base_url: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS
    request_timeout: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_RETRIES
    auth_token_env: str = "OPENAI_API_KEY"

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionRecord:
    cache_key: str
    prompt: str
    completion: str
    latency: float = 0.0
    token_usage: dict | None = None
    from_cache: bool = field(default=False, compare=False)


def cache_key_for(model_name: str, prompt: str, temperature: float, max_tokens: int) -> str:
    payload = json.dumps(
        {
            "model_name": model_name,
            "prompt": prompt,
            "temperature": temperature,
            "max_tokens": max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class LlmClient:
    """Issues chat completions for rendered prompts.

    Responses are cached on disk by a digest of everything that determines
    them, so re-running an evaluation replays from cache. In offline mode a
    cache miss is an error instead of a network call, which makes rescoring
    provably network-free.
    """

    def __init__(
        self,
        config: ModelEndpointConfig,
        cache_dir: str | Path | None = None,
        offline: bool = False,
        sleeper=time.sleep,
        transport: httpx.BaseTransport | None = None,
    ):
        self.config = config
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.offline = offline
        self._sleeper = sleeper
        self._transport = transport
        self._http: httpx.Client | None = None
        self._cache_lock = threading.Lock()

    # -- cache --------------------------------------------------------------

    def _cache_path(self, key: str) -> Path | None:
        return self.cache_dir / f"{key}.json" if self.cache_dir else None

    def _cache_load(self, key: str) -> CompletionRecord | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        return CompletionRecord(
            cache_key=key,
            prompt=data.get("prompt", ""),
            completion=data["completion"],
            latency=data.get("latency", 0.0),
            token_usage=data.get("token_usage"),
            from_cache=True,
        )

    def _cache_store(self, record: CompletionRecord) -> None:
        path = self._cache_path(record.cache_key)
        if path is None:
            return
        payload = {
            "cache_key": record.cache_key,
            "model_name": self.config.model_name,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "prompt": record.prompt,
            "completion": record.completion,
            "latency": record.latency,
            "token_usage": record.token_usage,
        }
        with self._cache_lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
            tmp.replace(path)

    # -- completion ---------------------------------------------------------

    def complete(self, prompt: "RenderedPrompt | str") -> CompletionRecord:
        text = prompt.text if isinstance(prompt, RenderedPrompt) else prompt
        key = cache_key_for(
            self.config.model_name, text, self.config.temperature, self.config.max_tokens
        )
        cached = self._cache_load(key)
        if cached is not None:
            return cached
        if self.offline:
            raise TransportError(f"offline mode: no cached completion for key {key[:12]}...")
        completion, latency, usage = self._request(text)
        record = CompletionRecord(
            cache_key=key,
            prompt=text,
            completion=completion,
            latency=latency,
            token_usage=usage,
        )
        self._cache_store(record)
        return record

    def cached_completion(self, cache_key: str) -> CompletionRecord | None:
        """Look up a completion by digest without any network fallback."""
        return self._cache_load(cache_key)

    def _client(self) -> httpx.Client:
        if self._http is None:
            self._http = httpx.Client(
                timeout=self.config.request_timeout, transport=self._transport
            )
        return self._http

    def _request(self, prompt_text: str) -> tuple[str, float, dict | None]:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.auth_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        attempts = self.config.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                self._sleeper(_BACKOFF_BASE * (2 ** (attempt - 1)))
            started = time.perf_counter()
            try:
                response = self._client().post(url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"transport failure: {exc}"
                continue
            latency = time.perf_counter() - started
            if response.status_code == 200:
                content, usage = self._parse_response(response)
                return content, latency, usage
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"status {response.status_code}: {response.text[:200]}"
                continue
            raise EndpointError(
                f"endpoint rejected request with status {response.status_code}: "
                f"{response.text[:200]}"
            )
        raise TransportError(f"request failed after {attempts} attempts; last: {last_error}")

    def _parse_response(self, response: httpx.Response) -> tuple[str, dict | None]:
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"malformed completion response: {exc}") from exc
        return content, data.get("usage")

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


# ---------------------------------------------------------------------------
# Answer extraction
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```([a-zA-Z0-9_+-]*)\n?(.*?)```", re.DOTALL)
_SQL_START_RE = re.compile(r"\b(SELECT|WITH)\b", re.IGNORECASE)


def _strip_fences(text: str) -> str:
    match = _FENCE_RE.search(text)
    if match:
        return match.group(2)
    # an unterminated opening fence still marks where the code starts
    opening = text.find("```")
    if opening >= 0:
        after = text[opening + 3 :]
        newline = after.find("\n")
        if newline >= 0 and after[:newline].strip().isalnum():
            after = after[newline + 1 :]
        return after
    return text


def _first_statement(text: str) -> str:
    # cut at the first semicolon outside quoted regions
    quote = None
    for i, ch in enumerate(text):
        if quote:
            if ch == quote:
                quote = None
            continue
        if ch in "'\"`":
            quote = ch
        elif ch == ";":
            return text[:i]
    return text


def extract_sql(completion: str, mode: str = FREE_SQL) -> str:
    """Pull one SQL statement out of a model completion."""
    text = _strip_fences(completion)
    if mode == COMPLETION_AFTER_SELECT:
        head = text.lstrip()
        if not _SQL_START_RE.match(head):
            text = "SELECT " + head
    match = _SQL_START_RE.search(text)
    if not match:
        raise ExtractionError("completion contains no SQL statement")
    statement = _first_statement(text[match.start() :])
    statement = statement.strip()
    if not statement:
        raise ExtractionError("completion contains no SQL statement")
    return statement


_QUESTION_MARKER_RE = re.compile(r"question\s*:", re.IGNORECASE)


def extract_question(completion: str) -> str:
    """Text following the final 'question:' marker, first non-empty line."""
    matches = list(_QUESTION_MARKER_RE.finditer(completion))
    if not matches:
        raise ExtractionError("completion lacks a 'question:' line")
    remainder = completion[matches[-1].end() :]
    for line in remainder.splitlines() or [remainder]:
        stripped = line.strip()
        if stripped:
            return stripped
    raise ExtractionError("'question:' marker is followed by no text")


_BOOL_RE = re.compile(r"\b(true|false)\b", re.IGNORECASE)


def extract_bool(completion: str) -> bool:
    """Last standalone True/False in the completion."""
    matches = _BOOL_RE.findall(completion)
    if not matches:
        raise ExtractionError("completion contains neither True nor False")
    return matches[-1].lower() == "true"
