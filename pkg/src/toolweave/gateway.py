"""Backend-agnostic chat-completion access for generation and verification.

Two backends: a remote OpenAI-compatible endpoint (with retries and
exponential backoff) and a scripted backend that replays an ordered
transcript of (matcher, response) entries for offline, reproducible runs.
A content-addressed on-disk cache can sit in front of either backend.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx
import jsonschema

from .model import Value

logger = logging.getLogger(__name__)

API_KEY_ENV = "PTOOL_API_KEY"
CHAT_COMPLETIONS_PATH = "/v1/chat/completions"

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n(.*?)\n?\s*```\s*$", re.DOTALL)


class GatewayError(Exception):
    """Base class for completion failures."""


class TransportError(GatewayError):
    """Remote backend failed after exhausting its retry budget."""


class ScriptedExhaustedError(GatewayError):
    """A scripted backend had no entry matching the request."""


class StructureError(GatewayError):
    """Completion never conformed to the requested shape within budget."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.7
    max_tokens: int = 2048
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @property
    def prompt_text(self) -> str:
        """All message contents joined; what scripted matchers see."""
        return "\n".join(m.content for m in self.messages)

    def fingerprint(self) -> str:
        payload = {
            "model_id": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "seed": self.seed,
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Backend:
    """Anything that turns a ChatRequest into assistant text."""

    def complete(self, request: ChatRequest) -> str:
        raise NotImplementedError


Matcher = str | re.Pattern | Callable[[ChatRequest], bool]
Responder = str | Callable[[ChatRequest], str]


@dataclass
class ScriptedEntry:
    """One transcript line: serve ``response`` when ``matcher`` hits.

    One-shot by default; ``repeat=True`` entries never exhaust (used by the
    rule-driven demo script that answers a whole pipeline run).
    """

    matcher: Matcher
    response: Responder
    repeat: bool = False
    consumed: bool = field(default=False, compare=False)

    def matches(self, request: ChatRequest) -> bool:
        if isinstance(self.matcher, str):
            return self.matcher in request.prompt_text
        if isinstance(self.matcher, re.Pattern):
            return self.matcher.search(request.prompt_text) is not None
        return bool(self.matcher(request))


class ScriptedBackend(Backend):
    """Deterministic replay backend: first matching unconsumed entry wins."""

    def __init__(self, entries: Sequence[ScriptedEntry] = ()):
        self.entries = list(entries)
        self._lock = threading.Lock()
        self.calls = 0

    def add(self, matcher: Matcher, response: Responder, repeat: bool = False) -> None:
        self.entries.append(ScriptedEntry(matcher, response, repeat))

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
            for entry in self.entries:
                if entry.consumed and not entry.repeat:
                    continue
                if entry.matches(request):
                    entry.consumed = True
                    if callable(entry.response):
                        return entry.response(request)
                    return entry.response
        snippet = request.prompt_text[:160].replace("\n", " ")
        raise ScriptedExhaustedError(f"no scripted entry matches request: {snippet!r}")


class RemoteBackend(Backend):
    """OpenAI-compatible chat completions over HTTP.

    Transient failures (connect errors, 429, 5xx) retry with exponential
    backoff up to ``max_retries``; anything else raises immediately.
    """

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = API_KEY_ENV,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        backoff_cap: float = 30.0,
        timeout: float = 60.0,
        transport: Callable[[str, dict, dict], httpx.Response] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.timeout = timeout
        self._transport = transport or self._http_post
        self._sleep = sleep

    def _http_post(self, url: str, headers: dict, payload: dict) -> httpx.Response:
        return httpx.post(url, headers=headers, json=payload, timeout=self.timeout)

    def complete(self, request: ChatRequest) -> str:
        url = self.endpoint + CHAT_COMPLETIONS_PATH
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload: dict[str, Any] = {
            "model": request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed

        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = min(self.backoff_base * 2 ** (attempt - 1), self.backoff_cap)
                logger.debug("retrying in %.2fs (attempt %d)", delay, attempt + 1)
                self._sleep(delay)
            try:
                response = self._transport(url, headers, payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from exc
        raise TransportError(f"retries exhausted: {last_error}")


class Gateway:
    """Front door used by every stage: caching, worker cap, structured output."""

    def __init__(
        self,
        backend: Backend,
        model_id: str = "default",
        cache_dir: str | Path | None = None,
        max_workers: int = 4,
    ):
        self.backend = backend
        self.model_id = model_id
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._workers = threading.BoundedSemaphore(max_workers)

    def request(
        self,
        system: str,
        user: str,
        temperature: float = 0.7,
        seed: int | None = None,
        max_tokens: int = 2048,
    ) -> ChatRequest:
        return ChatRequest(
            model_id=self.model_id,
            messages=(ChatMessage("system", system), ChatMessage("user", user)),
            temperature=temperature,
            max_tokens=max_tokens,
            seed=seed,
        )

    def _cache_path(self, request: ChatRequest) -> Path | None:
        if not self.cache_dir:
            return None
        return self.cache_dir / f"{request.fingerprint()}.txt"

    def complete(self, request: ChatRequest) -> str:
        path = self._cache_path(request)
        if path is not None and path.exists():
            return path.read_text(encoding="utf-8")
        with self._workers:
            text = self.backend.complete(request)
        if path is not None:
            fd, tmp = tempfile.mkstemp(dir=str(self.cache_dir), suffix=".part")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        return text

    def complete_structured(
        self,
        request: ChatRequest,
        shape: dict,
        repair_budget: int = 2,
    ) -> Value:
        """Completion parsed as JSON and validated against ``shape``.

        On a parse or shape failure the error is appended to the conversation
        and the request retried, at most ``repair_budget`` times.
        """
        if repair_budget < 0:
            raise ValueError("repair_budget must be >= 0")
        current = request
        for attempt in range(repair_budget + 1):
            text = self.complete(current)
            try:
                value = _parse_json_reply(text)
                jsonschema.validate(value, shape)
                return value
            except (ValueError, jsonschema.ValidationError) as exc:
                error = _describe_structure_error(exc)
                if attempt == repair_budget:
                    raise StructureError(
                        f"no conforming value after {repair_budget} repairs: {error}"
                    ) from exc
                logger.debug("structure repair %d: %s", attempt + 1, error)
                current = ChatRequest(
                    model_id=current.model_id,
                    messages=current.messages
                    + (
                        ChatMessage("assistant", text or "<empty>"),
                        ChatMessage(
                            "user",
                            "Your previous reply was not valid: "
                            f"{error}. Reply again with only the corrected JSON.",
                        ),
                    ),
                    temperature=current.temperature,
                    max_tokens=current.max_tokens,
                    seed=current.seed,
                )
        raise AssertionError("unreachable")


def _parse_json_reply(text: str) -> Value:
    stripped = text.strip()
    fenced = _FENCE_RE.match(stripped)
    if fenced:
        stripped = fenced.group(1).strip()
    try:
        return json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc


def _describe_structure_error(exc: Exception) -> str:
    if isinstance(exc, jsonschema.ValidationError):
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        return f"schema violation at {path}: {exc.message}"
    return str(exc)
