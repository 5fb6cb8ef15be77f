"""Chat-completion access to interchangeable providers.

Real providers speak the common chat-completion JSON shape over HTTP; the
scripted mock replays canned responses (in call order or keyed by a prompt
fingerprint) so every pipeline behavior is testable offline. Credential
values are read from the environment at call time and never appear in logs
or error messages.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass

import requests

from ontorag.errors import IoError, OntoragError

ENV_ENDPOINT = "ONTORAG_LLM_ENDPOINT"
ENV_API_KEY = "ONTORAG_LLM_API_KEY"
ENV_MODEL = "ONTORAG_LLM_MODEL"

DEFAULT_TEMPERATURE = 0.2


class GatewayError(OntoragError):
    pass


class TransportError(GatewayError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"transport failure: {detail}")


class RateLimitedError(GatewayError):
    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f"rate limited after {attempts} attempts")


class AuthMissingError(GatewayError):
    def __init__(self, env_var: str):
        self.env_var = env_var
        super().__init__(f"credential environment variable {env_var} is not set")


class MockExhaustedError(GatewayError):
    pass


@dataclass
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str


@dataclass
class ChatRequest:
    messages: list[ChatMessage]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = 1024
    model_id: str = ""

    def __post_init__(self):
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("a chat request needs at least one user message")
        for m in self.messages:
            if m.role not in {"system", "user", "assistant"}:
                raise ValueError(f"unknown message role {m.role!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def user_request(prompt: str, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = 1024, model_id: str = "") -> ChatRequest:
    return ChatRequest([ChatMessage("user", prompt)], temperature, max_tokens, model_id)


@dataclass
class ProviderConfig:
    kind: str  # "openai-compatible" | "scripted-mock"
    endpoint: str = ""
    credential_env: str = ""
    model_id: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    script_path: str = ""
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind == "scripted-mock":
            if not self.script_path:
                raise ValueError("scripted-mock providers need a script_path")
        elif self.kind == "openai-compatible":
            if not self.endpoint:
                raise ValueError("openai-compatible providers need an endpoint")
        else:
            raise ValueError(f"unknown provider kind {self.kind!r}")

    @classmethod
    def from_json_file(cls, path: str) -> "ProviderConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
        return cls(**data)

    @classmethod
    def from_env(cls) -> "ProviderConfig":
        endpoint = os.environ.get(ENV_ENDPOINT, "")
        if not endpoint:
            raise ValueError(f"{ENV_ENDPOINT} is not set")
        return cls(
            kind="openai-compatible",
            endpoint=endpoint,
            credential_env=ENV_API_KEY,
            model_id=os.environ.get(ENV_MODEL, ""),
        )


def fingerprint(messages: list[ChatMessage]) -> str:
    """Stable hex digest over roles and contents, in order."""
    digest = hashlib.sha256()
    for m in messages:
        digest.update(m.role.encode("utf-8"))
        digest.update(b"\x1f")
        digest.update(m.content.encode("utf-8"))
        digest.update(b"\x1e")
    return digest.hexdigest()


@dataclass
class MockScript:
    ordered: list[str] | None = None
    keyed: dict[str, str] | None = None
    default_response: str | None = None

    def __post_init__(self):
        if self.ordered is not None and self.keyed is not None:
            raise ValueError("a mock script is either ordered or keyed, not both")
        if self.ordered is None and self.keyed is None:
            self.ordered = []

    @classmethod
    def from_dict(cls, data: dict) -> "MockScript":
        return cls(
            ordered=data.get("ordered"),
            keyed=data.get("keyed"),
            default_response=data.get("default"),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "MockScript":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise IoError(path, str(exc)) from exc


class ScriptedMockProvider:
    """Deterministic provider driven by a MockScript; records a transcript."""

    def __init__(self, script: MockScript, model_id: str = "mock"):
        self.script = script
        self.model_id = model_id
        self.transcript: list[tuple[ChatRequest, str]] = []
        self._queue = deque(script.ordered or [])
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            if self.script.keyed is not None:
                key = fingerprint(request.messages)
                text = self.script.keyed.get(key, self.script.default_response)
                if text is None:
                    raise MockExhaustedError(
                        f"no scripted response for fingerprint {key[:16]}…"
                    )
            elif self._queue:
                text = self._queue.popleft()
            elif self.script.default_response is not None:
                text = self.script.default_response
            else:
                raise MockExhaustedError("ordered mock script is exhausted")
            self.transcript.append((request, text))
            return text


class OpenAiCompatProvider:
    """HTTP chat-completion client with bounded retries and in-flight limit."""

    def __init__(self, config: ProviderConfig, post=None, sleep=time.sleep):
        self.config = config
        self._post = post or requests.post
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def complete(self, request: ChatRequest) -> str:
        key = ""
        if self.config.credential_env:
            key = os.environ.get(self.config.credential_env, "")
            if not key:
                raise AuthMissingError(self.config.credential_env)
        payload = {
            "model": request.model_id or self.config.model_id,
            "messages": [
                {"role": m.role, "content": m.content} for m in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"

        attempts = 1 + max(0, self.config.max_retries)
        last_detail = ""
        rate_limited = False
        for attempt in range(attempts):
            if attempt:
                self._sleep(min(8.0, 0.5 * 2 ** (attempt - 1)))
            try:
                with self._slots:
                    response = self._post(
                        self.config.endpoint,
                        json=payload,
                        headers=headers,
                        timeout=self.config.timeout,
                    )
            except requests.RequestException as exc:
                last_detail = type(exc).__name__
                continue
            if response.status_code == 429:
                rate_limited = True
                last_detail = "HTTP 429"
                continue
            if response.status_code >= 500:
                rate_limited = False
                last_detail = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}")
            try:
                data = response.json()
                return data["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from exc
        if rate_limited:
            raise RateLimitedError(attempts)
        raise TransportError(f"{last_detail or 'request failed'} after {attempts} attempts")


def make_provider(config: ProviderConfig):
    if config.kind == "scripted-mock":
        return ScriptedMockProvider(
            MockScript.from_json_file(config.script_path),
            model_id=config.model_id or "mock",
        )
    return OpenAiCompatProvider(config)


def complete(request: ChatRequest, provider) -> str:
    """Run one completion. `provider` is a provider instance or a config;
    passing a config builds a throwaway provider (fine for keyed mocks and
    HTTP, wrong for ordered mocks that must keep their position)."""
    if isinstance(provider, ProviderConfig):
        provider = make_provider(provider)
    return provider.complete(request)
