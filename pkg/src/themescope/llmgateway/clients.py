"""Chat client implementations: remote JSON endpoint, scripted mock, cache."""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path
from typing import Callable, Optional, Sequence


class ChatError(RuntimeError):
    pass


class ParseError(ChatError):
    """Unparseable response; carries the raw text for diagnosis."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}; raw response: {raw!r}")
        self.raw = raw


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class RemoteChatClient:
    """POST {model, messages, temperature, max_tokens} -> {text}.

    Endpoint and key come from CHAT_ENDPOINT / CHAT_API_KEY unless given.
    Bounded retries with exponential backoff, then ChatError.
    """

    def __init__(self, model: str, name: str = "remote-chat",
                 endpoint: Optional[str] = None, api_key: Optional[str] = None,
                 max_output_tokens: int = 512, temperature: float = 0.0,
                 retries: int = 3, backoff_base: float = 0.5,
                 timeout: float = 60.0):
        self.model = model
        self.name = name
        self.endpoint = endpoint or os.environ.get("CHAT_ENDPOINT", "")
        self.api_key = api_key if api_key is not None else os.environ.get(
            "CHAT_API_KEY", "")
        if not self.endpoint:
            raise ChatError("remote chat client needs CHAT_ENDPOINT")
        self.max_output_tokens = max_output_tokens
        self.temperature = temperature
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout

    def chat(self, prompt: str) -> str:
        payload = json.dumps({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
        }).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=payload,
            headers={"Content-Type": "application/json",
                     "Authorization": f"Bearer {self.api_key}"})
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    body = json.loads(resp.read().decode("utf-8"))
                return str(body["text"])
            except Exception as exc:
                last_exc = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff_base * (2 ** attempt))
        raise ChatError(f"chat request failed after {self.retries} "
                        f"attempts: {last_exc}")


class MockChatClient:
    """Deterministic offline client.

    Resolution order per prompt: exact sha256 entry from ``responses``,
    first matching regex rule, then the ``responder`` callable.  Scripts
    load from JSON: {"responses": {hash: text}, "rules": [{"match": regex,
    "response": text}]}.
    """

    def __init__(self,
                 responses: Optional[dict[str, str]] = None,
                 rules: Optional[Sequence[tuple[str, str]]] = None,
                 responder: Optional[Callable[[str], Optional[str]]] = None,
                 name: str = "mock-chat",
                 max_output_tokens: int = 512,
                 temperature: float = 0.0):
        self.responses = dict(responses or {})
        self.rules = [(re.compile(pat, re.S), resp) for pat, resp in (rules or [])]
        self.responder = responder
        self.name = name
        self.max_output_tokens = max_output_tokens
        self.temperature = temperature
        self.calls: list[str] = []

    @classmethod
    def from_json(cls, path: str | Path, **kwargs) -> "MockChatClient":
        spec = json.loads(Path(path).read_text("utf-8"))
        rules = [(r["match"], r["response"]) for r in spec.get("rules", [])]
        return cls(responses=spec.get("responses"), rules=rules, **kwargs)

    def chat(self, prompt: str) -> str:
        self.calls.append(prompt)
        hit = self.responses.get(prompt_hash(prompt))
        if hit is not None:
            return hit
        for pattern, response in self.rules:
            if pattern.search(prompt):
                return response
        if self.responder is not None:
            out = self.responder(prompt)
            if out is not None:
                return out
        raise ChatError("mock client has no scripted response for prompt")


class CachingChatClient:
    """Response cache keyed by prompt hash; safe under concurrent calls."""

    def __init__(self, inner):
        self.inner = inner
        self.name = f"cached({inner.name})"
        self.max_output_tokens = inner.max_output_tokens
        self.temperature = inner.temperature
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()

    def chat(self, prompt: str) -> str:
        key = prompt_hash(prompt)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        out = self.inner.chat(prompt)
        with self._lock:
            self._cache[key] = out
        return out
