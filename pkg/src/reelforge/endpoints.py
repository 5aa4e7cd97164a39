"""Minimal chat-completions client over HTTPS with env-var key indirection."""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass

import httpx

TRANSPORT_RETRIES = 2
BACKOFF_BASE_S = 0.5


class EndpointError(RuntimeError):
    """Endpoint unreachable or returned a non-success status after retries."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_id: str
    api_key_env: str = "REELFORGE_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 8192
    supports_images: bool = False
    request_timeout_ms: int = 120_000


def digest(text: str) -> str:
    """Short stable digest used wherever prompt/response text must not be persisted."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class ChatClient:
    """Reentrant client for one endpoint; safe to share across worker threads."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        self.config = config
        self._client = httpx.Client(
            transport=transport,
            timeout=config.request_timeout_ms / 1000.0,
        )
        self._sleep = sleep

    def _api_key(self) -> str | None:
        return os.environ.get(self.config.api_key_env)

    def complete(self, messages: list[dict], images: list[tuple[str, str]] | None = None) -> str:
        """Send role-tagged messages, optionally attaching (mime, base64) images
        to the last user message, and return the assistant text."""
        if images:
            messages = [dict(m) for m in messages]
            last = messages[-1]
            parts = [{"type": "text", "text": last["content"]}]
            for mime, b64 in images:
                parts.append(
                    {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{b64}"}}
                )
            last["content"] = parts

        body = {
            "model": self.config.model_id,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        headers = {}
        key = self._api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"

        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(TRANSPORT_RETRIES + 1):
            try:
                resp = self._client.post(url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt < TRANSPORT_RETRIES:
                    self._sleep(BACKOFF_BASE_S * 2**attempt)
                continue
            if resp.status_code >= 500:
                last_error = EndpointError(f"server error {resp.status_code}")
                if attempt < TRANSPORT_RETRIES:
                    self._sleep(BACKOFF_BASE_S * 2**attempt)
                continue
            if resp.status_code != 200:
                raise EndpointError(f"endpoint returned status {resp.status_code}")
            data = resp.json()
            try:
                return data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise EndpointError(f"malformed completion response: {exc}") from exc
        raise EndpointError(f"endpoint failed after retries: {last_error}")

    def close(self):
        self._client.close()
