"""Pluggable access to a chat-completion model with record/replay support.

Three backends: a live HTTP endpoint, replay from a recorded cassette, and a
scripted queue for tests. Cassettes key entries by a stable digest over the
prompt and the sampling parameters, so replay is exact-match and drift in any
of those inputs surfaces as an explicit cassette miss.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Protocol

import requests

from .errors import GatewayError
from .prompts import PromptText

DEFAULT_MODEL_ID = "llama-2-70b-chat"
DEFAULT_TEMPERATURE = 0.01
DEFAULT_MAX_NEW_TOKENS = 2000
DEFAULT_TIMEOUT = 120.0
DEFAULT_PARALLELISM = 4


@dataclass(frozen=True)
class CompletionParams:
    model_id: str = DEFAULT_MODEL_ID
    temperature: float = DEFAULT_TEMPERATURE
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    timeout: float = DEFAULT_TIMEOUT
    retries: int = 2

    def digest_fields(self) -> dict:
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "max_new_tokens": self.max_new_tokens,
        }


@dataclass(frozen=True)
class Completion:
    """Raw response text plus the moment it was produced or recorded."""

    text: str
    timestamp: str


def request_digest(prompt: PromptText, params: CompletionParams) -> str:
    """Stable key over everything that determines a model response."""
    payload = {
        "template_id": prompt.template_id,
        "prompt": prompt.text,
        **params.digest_fields(),
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Cassette:
    """Digest-keyed store of recorded (prompt, params, response) entries.

    Writes are keyed, so re-recording the same request is idempotent. The file
    form is JSON with sorted keys and therefore diffs cleanly.
    """

    def __init__(self, entries: Optional[dict[str, dict]] = None, path: Optional[Path] = None) -> None:
        self.entries: dict[str, dict] = dict(entries or {})
        self.path = path
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: Path) -> "Cassette":
        doc = json.loads(Path(path).read_text("utf-8"))
        return cls(entries=doc.get("entries", {}), path=Path(path))

    def save(self, path: Optional[Path] = None) -> Path:
        target = Path(path or self.path or "cassette.json")
        with self._lock:
            doc = {"version": 1, "entries": self.entries}
            target.write_text(
                json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n", "utf-8"
            )
        self.path = target
        return target

    def lookup(self, digest: str) -> Optional[dict]:
        return self.entries.get(digest)

    def record(self, digest: str, prompt: PromptText, params: CompletionParams, response: str, timestamp: str) -> None:
        with self._lock:
            self.entries[digest] = {
                "template_id": prompt.template_id,
                "prompt": prompt.text,
                "params": params.digest_fields(),
                "response": response,
                "recorded_at": timestamp,
            }

    def __len__(self) -> int:
        return len(self.entries)


class Backend(Protocol):
    name: str

    def complete(self, prompt: PromptText, params: CompletionParams) -> Completion: ...


class ReplayBackend:
    """Serves recorded responses; never touches the network."""

    name = "replay"

    def __init__(self, cassette: Cassette) -> None:
        self.cassette = cassette
        self.call_count = 0
        self._lock = threading.Lock()

    def complete(self, prompt: PromptText, params: CompletionParams) -> Completion:
        with self._lock:
            self.call_count += 1
        digest = request_digest(prompt, params)
        entry = self.cassette.lookup(digest)
        if entry is None:
            raise GatewayError(
                "cassette-miss",
                f"no recorded response for digest {digest}",
                digest=digest,
                template_id=prompt.template_id,
            )
        return Completion(text=entry["response"], timestamp=entry.get("recorded_at", ""))


class ScriptedBackend:
    """Returns queued responses in order, or via a callable; for tests."""

    name = "scripted"

    def __init__(self, script: list[str] | Callable[[PromptText, CompletionParams], str]) -> None:
        self._script = script
        self._index = 0
        self._lock = threading.Lock()
        self.call_count = 0

    def complete(self, prompt: PromptText, params: CompletionParams) -> Completion:
        with self._lock:
            self.call_count += 1
            if callable(self._script):
                text = self._script(prompt, params)
            else:
                if self._index >= len(self._script):
                    raise GatewayError("script-exhausted", "scripted backend ran out of responses")
                text = self._script[self._index]
                self._index += 1
        return Completion(text=text, timestamp=_utc_now())


class LiveBackend:
    """Generic chat-completion HTTP backend.

    ``adapter`` selects the request/response shape: "openai-chat" posts an
    OpenAI-style chat body and reads choices[0].message.content; "plain" posts
    {prompt, ...} and reads {text}. The endpoint is the full URL to POST to.
    """

    name = "live"

    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        adapter: str = "openai-chat",
        session: Optional[requests.Session] = None,
    ) -> None:
        if adapter not in ("openai-chat", "plain"):
            raise GatewayError("unknown-adapter", f"unknown backend adapter {adapter!r}")
        self.endpoint = endpoint
        self.adapter = adapter
        self._api_key = api_key
        self._session = session or requests.Session()

    def _request_body(self, prompt: PromptText, params: CompletionParams) -> dict:
        if self.adapter == "openai-chat":
            return {
                "model": params.model_id,
                "messages": [{"role": "user", "content": prompt.text}],
                "temperature": params.temperature,
                "max_tokens": params.max_new_tokens,
            }
        return {
            "model": params.model_id,
            "prompt": prompt.text,
            "temperature": params.temperature,
            "max_new_tokens": params.max_new_tokens,
        }

    def _extract_text(self, payload: dict) -> str:
        try:
            if self.adapter == "openai-chat":
                return payload["choices"][0]["message"]["content"]
            return payload["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(
                "bad-response-shape", f"endpoint response missing completion text: {exc!r}"
            ) from exc

    def complete(self, prompt: PromptText, params: CompletionParams) -> Completion:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            response = self._session.post(
                self.endpoint,
                json=self._request_body(prompt, params),
                headers=headers,
                timeout=params.timeout,
            )
        except requests.Timeout as exc:
            raise GatewayError("timeout", f"completion timed out after {params.timeout}s") from exc
        except requests.RequestException as exc:
            raise GatewayError("network-error", f"completion request failed: {exc}", transient=True) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise GatewayError(
                "network-error",
                f"endpoint returned HTTP {response.status_code}",
                transient=True,
                status=response.status_code,
            )
        if response.status_code >= 400:
            raise GatewayError(
                "http-error",
                f"endpoint returned HTTP {response.status_code}",
                status=response.status_code,
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise GatewayError("bad-response-shape", "endpoint response is not JSON") from exc
        return Completion(text=self._extract_text(payload), timestamp=_utc_now())


@dataclass
class Gateway:
    """Completion entry point: retry policy, parallelism bound, recording.

    Transient backend failures are retried with exponential backoff up to
    ``params.retries``. In record mode every successful completion is written
    to ``record_cassette`` under its request digest (keyed, hence idempotent
    across retries). At most ``parallelism`` completions run concurrently.
    """

    backend: Optional[Backend] = None
    record_cassette: Optional[Cassette] = None
    parallelism: int = DEFAULT_PARALLELISM
    backoff_base: float = 0.5
    _semaphore: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._semaphore = threading.Semaphore(self.parallelism)

    @property
    def backend_name(self) -> str:
        return self.backend.name if self.backend else "unconfigured"

    def complete(self, prompt: PromptText, params: CompletionParams) -> Completion:
        if self.backend is None:
            raise GatewayError("backend-unconfigured", "no completion backend configured")
        attempts = params.retries + 1
        last_error: Optional[GatewayError] = None
        with self._semaphore:
            for attempt in range(attempts):
                try:
                    completion = self.backend.complete(prompt, params)
                    break
                except GatewayError as exc:
                    last_error = exc
                    if not exc.transient or attempt == attempts - 1:
                        raise
                    time.sleep(self.backoff_base * (2**attempt))
            else:  # pragma: no cover - loop always breaks or raises
                raise last_error or GatewayError("network-error", "completion failed")
        if self.record_cassette is not None:
            digest = request_digest(prompt, params)
            self.record_cassette.record(digest, prompt, params, completion.text, completion.timestamp)
        return completion


def make_params(
    model_id: str = DEFAULT_MODEL_ID,
    temperature: float = DEFAULT_TEMPERATURE,
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
    **overrides: object,
) -> CompletionParams:
    return replace(
        CompletionParams(model_id=model_id, temperature=temperature, max_new_tokens=max_new_tokens),
        **overrides,  # type: ignore[arg-type]
    )
