"""Judge backends: a scripted fixture and a chat-completions HTTP client."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

logger = logging.getLogger(__name__)


class JudgeError(RuntimeError):
    pass


class BackendError(JudgeError):
    """The backend could not produce a reply (non-retryable: auth, bad request, missing script)."""


class BackendUnavailableError(BackendError):
    """Transport failure that persisted through every retry; safe to retry later."""


@dataclass(frozen=True)
class JudgeRequest:
    task: str  # "pedagogy" or "engagement"
    item_id: str
    messages: tuple[Mapping[str, str], ...]

    def with_followup(self, assistant_reply: str, user_message: str) -> "JudgeRequest":
        extra = ({"role": "assistant", "content": assistant_reply}, {"role": "user", "content": user_message})
        return JudgeRequest(self.task, self.item_id, self.messages + extra)


class JudgeBackend(ABC):
    name: str = "abstract"

    @property
    @abstractmethod
    def identity(self) -> dict:
        """Backend name, model identifier and decoding parameters (part of every cache key)."""

    @abstractmethod
    def complete(self, request: JudgeRequest) -> str:
        ...


@dataclass
class FixtureBackend(JudgeBackend):
    """Replays scripted replies keyed by (task, item_id).

    Several replies for one key are served in order (so a malformed reply
    followed by a valid one exercises the reprompt path); the last one repeats
    once the script is exhausted.
    """

    replies: Mapping[tuple[str, str], Sequence[str]]
    label: str = "inline"
    requests: int = 0
    _served: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    name = "fixture"

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "FixtureBackend":
        path = Path(path)
        raw = path.read_bytes()
        replies: dict[tuple[str, str], list[str]] = {}
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["task"], rec["item_id"])
                reply = rec["reply"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise BackendError(f"{path}:{lineno}: bad transcript line") from None
            replies.setdefault(key, []).append(reply if isinstance(reply, str) else json.dumps(reply, sort_keys=True))
        return cls(replies, label="sha256:" + hashlib.sha256(raw).hexdigest())

    @property
    def identity(self) -> dict:
        return {"backend": self.name, "model": f"transcript:{self.label}", "temperature": 0.0}

    def complete(self, request: JudgeRequest) -> str:
        key = (request.task, request.item_id)
        script = self.replies.get(key)
        if not script:
            raise BackendError(f"fixture transcript has no reply for {request.task} item {request.item_id!r}")
        with self._lock:
            self.requests += 1
            i = self._served.get(key, 0)
            self._served[key] = i + 1
        return script[min(i, len(script) - 1)]


@dataclass
class RemoteBackend(JudgeBackend):
    """Chat-completions style HTTP judge, temperature 0 by default."""

    url: str
    model: str
    api_key: str | None = None
    temperature: float = 0.0
    max_retries: int = 3
    backoff_base: float = 1.0
    timeout: float = 60.0
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    requests: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    name = "remote"

    @classmethod
    def from_env(cls, url: str, model: str, api_key_env: str | None, **kwargs) -> "RemoteBackend":
        key = os.environ.get(api_key_env) if api_key_env else None
        if api_key_env and not key:
            raise BackendError(f"environment variable {api_key_env} is not set")
        url = os.environ.get("TUTOREVAL_JUDGE_URL", url)
        model = os.environ.get("TUTOREVAL_JUDGE_MODEL", model)
        return cls(url=url, model=model, api_key=key, **kwargs)

    @property
    def identity(self) -> dict:
        return {"backend": self.name, "model": self.model, "temperature": self.temperature}

    def _endpoint(self) -> str:
        url = self.url.rstrip("/")
        return url if url.endswith("/chat/completions") else url + "/chat/completions"

    def complete(self, request: JudgeRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "messages": [dict(m) for m in request.messages], "temperature": self.temperature}
        last_error = "unknown error"
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            for attempt in range(self.max_retries + 1):
                if attempt:
                    delay = self.backoff_base * 2 ** (attempt - 1)
                    logger.warning("judge request %s/%s failed (%s); retrying in %.1fs", request.task, request.item_id, last_error, delay)
                    self.sleep(delay)
                try:
                    resp = client.post(self._endpoint(), headers=headers, json=payload)
                except httpx.TransportError as exc:
                    last_error = f"transport: {exc.__class__.__name__}"
                    continue
                with self._lock:
                    self.requests += 1
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                    continue
                if resp.status_code in (401, 403):
                    raise BackendError(f"judge endpoint rejected credentials (HTTP {resp.status_code})")
                if resp.status_code >= 400:
                    raise BackendError(f"judge endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    data = resp.json()
                    content = data["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    raise BackendError("judge endpoint returned an unexpected payload") from None
                usage = data.get("usage") or {}
                with self._lock:
                    self.prompt_tokens += int(usage.get("prompt_tokens", 0))
                    self.completion_tokens += int(usage.get("completion_tokens", 0))
                return content
        raise BackendUnavailableError(f"judge endpoint unavailable after {self.max_retries} retries: {last_error}")
