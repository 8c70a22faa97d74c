"""OpenAI-compatible chat-completions client with exponential backoff."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import httpx
from tenacity import RetryCallState, Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

log = logging.getLogger(__name__)

# Published default sampling temperatures of the studied model families.
DEFAULT_TEMPERATURES = {"gpt": 1.0, "deepseek": 0.3, "llama": 0.6, "qwen": 0.7}


class ChatError(Exception):
    """A request that did not produce a completion."""


class TransportError(ChatError):
    """Network failure, timeout, server error or rate limit (retried)."""


class RateLimitError(TransportError):
    pass


class AuthenticationError(ChatError):
    """Rejected credential; never retried."""


class ConfigurationError(Exception):
    pass


@dataclass
class ProviderConfig:
    endpoint_url: str
    model_id: str
    temperature: float = 1.0
    random_seed: int | None = None
    max_retries_per_round: int = 10
    request_timeout: float = 60.0
    credential_env_var: str = "OPENAI_API_KEY"
    max_request_attempts: int = 6
    backoff_initial: float = 1.0
    backoff_max: float = 60.0
    name: str | None = None

    def __post_init__(self):
        if self.max_retries_per_round < 1:
            raise ValueError("max_retries_per_round must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        if self.max_request_attempts < 1:
            raise ValueError("max_request_attempts must be >= 1")

    @property
    def label(self) -> str:
        return self.name or self.model_id

    @property
    def completions_url(self) -> str:
        url = self.endpoint_url.rstrip("/")
        return url if url.endswith("/chat/completions") else url + "/chat/completions"


class ChatClient:
    """Callable agent backed by a chat-completions endpoint.

    ``transport`` and ``sleep`` are injection points for tests.  Every
    backoff is appended to ``retry_log`` as ``(attempt, error_repr)``.
    """

    def __init__(self, provider: ProviderConfig, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        key = os.environ.get(provider.credential_env_var)
        if not key:
            raise ConfigurationError(
                f"credential variable {provider.credential_env_var} is not set for model {provider.model_id}"
            )
        self.provider = provider
        self.retry_log: list[tuple[int, str]] = []
        self._sleep = sleep
        self._http = httpx.Client(
            transport=transport,
            timeout=provider.request_timeout,
            headers={"Authorization": f"Bearer {key}"},
        )

    def close(self) -> None:
        self._http.close()

    def _before_sleep(self, state: RetryCallState) -> None:
        exc = state.outcome.exception() if state.outcome else None
        self.retry_log.append((state.attempt_number, repr(exc)))
        log.warning("chat request attempt %d failed (%r); backing off", state.attempt_number, exc)

    def _post(self, payload: dict) -> str:
        try:
            resp = self._http.post(self.provider.completions_url, json=payload)
        except httpx.TimeoutException as exc:
            raise TransportError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code == 429:
            raise RateLimitError("HTTP 429 rate limited")
        if resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ChatError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        return content or ""

    def __call__(self, messages: list[dict], temperature: float | None = None) -> str:
        if not messages:
            raise ValueError("messages must be nonempty")
        p = self.provider
        payload = {
            "model": p.model_id,
            "messages": messages,
            "temperature": p.temperature if temperature is None else temperature,
        }
        if p.random_seed is not None:
            payload["seed"] = p.random_seed
        retrying = Retrying(
            retry=retry_if_exception_type(TransportError),
            stop=stop_after_attempt(p.max_request_attempts),
            wait=wait_exponential(multiplier=p.backoff_initial, max=p.backoff_max),
            sleep=self._sleep,
            before_sleep=self._before_sleep,
            reraise=True,
        )
        for attempt in retrying:
            with attempt:
                return self._post(payload)
        raise AssertionError("unreachable")


def chat(messages: list[dict], provider: ProviderConfig, transport: httpx.BaseTransport | None = None) -> str:
    """One completion for ``messages``."""
    client = ChatClient(provider, transport=transport)
    try:
        return client(messages)
    finally:
        client.close()
