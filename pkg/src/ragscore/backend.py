"""Inference backend client: chat-completion wire calls, retries, disk cache,
and schema-constrained generation with a validate-and-repair loop.

Remote OpenAI-compatible servers expose no logits, so constrained mode over
HTTP validates the reply against the schema locally and re-prompts up to a
repair limit. Token-level masking lives in :mod:`ragscore.verdicts` and is
exercised against a local token-stream model.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol

import httpx
import jsonschema

from .errors import BackendError, EmptyCompletion, NetworkError, SchemaViolation

DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_TOKENS = 2048
DEFAULT_RETRIES = 3
DEFAULT_REPAIR_ATTEMPTS = 2


@dataclass(frozen=True)
class GenerationRequest:
    """One round-trip to the inference backend, cache-keyed by content."""

    model_id: str
    user_text: str
    system_text: str | None = None
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    schema: dict[str, Any] | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")

    def digest(self) -> str:
        key = json.dumps(
            {
                "model_id": self.model_id,
                "system_text": self.system_text,
                "user_text": self.user_text,
                "temperature": self.temperature,
                "schema": self.schema,
                "seed": self.seed,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(key.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationResult:
    text: str
    cached: bool
    latency: float
    attempt_count: int = 1

    def __post_init__(self) -> None:
        if self.attempt_count < 1:
            raise ValueError("attempt_count must be >= 1")


class Transport(Protocol):
    """Raw completion call; retries and caching live in BackendClient."""

    #: whether the server enforces the schema natively (grammar support)
    supports_schema: bool

    def complete(self, request: GenerationRequest) -> str: ...


class HttpTransport:
    """OpenAI-compatible chat-completions over HTTP."""

    supports_schema = False

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self._client = httpx.Client(timeout=timeout)

    def complete(self, request: GenerationRequest) -> str:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload: dict[str, Any] = {
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self._client.post(
                f"{self.endpoint}/chat/completions", json=payload, headers=headers
            )
        except httpx.HTTPError as exc:
            raise NetworkError(f"request to {self.endpoint} failed: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(
                f"backend returned status {response.status_code}: {response.text[:500]}"
            )
        body = response.json()
        try:
            return body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion body: {body!r}") from exc


@dataclass
class ReplayRule:
    """Match a request by substring of its user text and reply from a script.

    Replies are consumed in order; the last one repeats once exhausted.
    """

    contains: str
    replies: list[str]
    _cursor: int = field(default=0, repr=False)

    def next_reply(self) -> str:
        reply = self.replies[min(self._cursor, len(self.replies) - 1)]
        self._cursor += 1
        return reply


class ReplayTransport:
    """Scripted backend: maps prompts to canned completions.

    Ships as a first-class backend so the full pipeline runs offline with
    zero model access. Rules match in order; exact-digest entries win over
    substring rules.
    """

    supports_schema = False

    def __init__(
        self,
        rules: Iterable[ReplayRule] = (),
        by_digest: dict[str, str] | None = None,
    ):
        self.rules = list(rules)
        self.by_digest = dict(by_digest or {})
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayTransport":
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [
            ReplayRule(
                contains=entry["contains"],
                replies=list(entry["replies"])
                if "replies" in entry
                else [entry["reply"]],
            )
            for entry in spec.get("rules", [])
        ]
        return cls(rules=rules, by_digest=spec.get("by_digest"))

    def complete(self, request: GenerationRequest) -> str:
        with self._lock:
            digest = request.digest()
            if digest in self.by_digest:
                return self.by_digest[digest]
            for rule in self.rules:
                if rule.contains in request.user_text:
                    return rule.next_reply()
        raise BackendError(
            f"no replay rule matches request (user_text starts {request.user_text[:80]!r})"
        )


class ResponseCache:
    """Content-addressed on-disk cache: one file per request digest.

    Concurrent writers on the same key produce identical values by
    construction, so atomic replace gives last-writer-wins safely.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def get(self, digest: str) -> str | None:
        path = self._path(digest)
        if not path.is_file():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        return entry.get("text")

    def put(self, digest: str, text: str, request: GenerationRequest) -> None:
        entry = {
            "model": request.model_id,
            "timestamp": time.time(),
            "parameters": {
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "seed": request.seed,
                "constrained": request.schema is not None,
            },
            "text": text,
        }
        path = self._path(digest)
        tmp = path.with_suffix(f".tmp.{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


def extract_json_document(text: str) -> tuple[Any, str]:
    """Parse ``text`` as JSON, tolerating surrounding prose.

    Tries the whole string first, then the outermost brace-delimited span.
    Returns the parsed document and the exact span it came from; raises
    ValueError when neither parses.
    """
    stripped = text.strip()
    try:
        return json.loads(stripped), stripped
    except json.JSONDecodeError:
        pass
    start = stripped.find("{")
    end = stripped.rfind("}")
    if start != -1 and end > start:
        span = stripped[start : end + 1]
        return json.loads(span), span
    raise ValueError("no JSON document found in completion text")


class BackendClient:
    """Retrying, caching, concurrency-bounded wrapper around a transport.

    Safe to share across workers: the transport call is bounded by a
    semaphore and the cache tolerates concurrent access.
    """

    def __init__(
        self,
        transport: Transport,
        cache_dir: str | Path | None = None,
        max_retries: int = DEFAULT_RETRIES,
        repair_attempts: int = DEFAULT_REPAIR_ATTEMPTS,
        backoff_base: float = 0.5,
        max_concurrency: int = 8,
    ):
        if max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        self.transport = transport
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self.max_retries = max_retries
        self.repair_attempts = repair_attempts
        self.backoff_base = backoff_base
        self._semaphore = threading.Semaphore(max_concurrency)

    def _call_with_retries(self, request: GenerationRequest) -> str:
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt > 0:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    text = self.transport.complete(request)
            except NetworkError as exc:
                last_error = exc
                continue
            if not text:
                raise EmptyCompletion(f"empty completion for request {request.digest()}")
            return text
        raise NetworkError(
            f"backend unreachable after {self.max_retries + 1} attempts: {last_error}"
        )

    def generate(self, request: GenerationRequest) -> GenerationResult:
        started = time.monotonic()
        digest = request.digest()
        if self.cache is not None:
            cached = self.cache.get(digest)
            if cached is not None:
                return GenerationResult(
                    text=cached,
                    cached=True,
                    latency=time.monotonic() - started,
                    attempt_count=1,
                )
        text = self._call_with_retries(request)
        if self.cache is not None:
            self.cache.put(digest, text, request)
        return GenerationResult(
            text=text,
            cached=False,
            latency=time.monotonic() - started,
            attempt_count=1,
        )

    def generate_constrained(self, request: GenerationRequest) -> GenerationResult:
        """Generate text guaranteed to parse as JSON valid against
        ``request.schema``.

        Transports with native grammar support get the schema passed
        through; otherwise each reply is validated locally and the request
        is re-issued up to the repair limit.
        """
        if request.schema is None:
            raise ValueError("generate_constrained requires request.schema")
        jsonschema.Draft202012Validator.check_schema(request.schema)
        validator = jsonschema.Draft202012Validator(request.schema)

        started = time.monotonic()
        digest = request.digest()
        if self.cache is not None:
            cached = self.cache.get(digest)
            if cached is not None:
                return GenerationResult(
                    text=cached,
                    cached=True,
                    latency=time.monotonic() - started,
                    attempt_count=1,
                )

        attempts = 1 + max(0, self.repair_attempts)
        failures: list[str] = []
        for attempt in range(1, attempts + 1):
            text = self._call_with_retries(request)
            try:
                document, span = extract_json_document(text)
            except (ValueError, json.JSONDecodeError) as exc:
                failures.append(f"attempt {attempt}: not JSON ({exc})")
                continue
            errors = sorted(validator.iter_errors(document), key=str)
            if errors:
                failures.append(f"attempt {attempt}: {errors[0].message}")
                continue
            if self.cache is not None:
                self.cache.put(digest, span, request)
            return GenerationResult(
                text=span,
                cached=False,
                latency=time.monotonic() - started,
                attempt_count=attempt,
            )
        raise SchemaViolation(
            f"no schema-conforming output within {attempts} attempts: {failures}"
        )
