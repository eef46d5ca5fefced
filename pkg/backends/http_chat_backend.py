import logging
import os
import time

import httpx

from hint_engine.errors import BackendFailure, BackendTimeoutError, NetworkError

from .base import CompletionBackend

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class HttpChatBackend(CompletionBackend):
    """
    Client for any server speaking the chat-completions wire schema.
    The prompt goes out as a single user message; the first choice's message
    content comes back. Transport errors, timeouts and 429/5xx responses are
    retried with exponential backoff up to `max_retries` times.
    """

    def __init__(self, cfg, client: httpx.Client | None = None):
        super().__init__(cfg)
        self.url = self._chat_url(cfg.endpoint)
        self.client = client or httpx.Client(timeout=cfg.timeout)
        self._owns_client = client is None

    @staticmethod
    def _chat_url(endpoint: str) -> str:
        endpoint = endpoint.rstrip("/")
        return endpoint if endpoint.endswith("/chat/completions") else f"{endpoint}/chat/completions"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        api_key = os.getenv(self.cfg.api_key_env, "").strip() if self.cfg.api_key_env else ""
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _payload(self, prompt: str) -> dict:
        return {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }

    def complete(self, prompt: str) -> str:
        attempts = self.cfg.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                response = self.client.post(self.url, headers=self._headers(), json=self._payload(prompt),
                                            timeout=self.cfg.timeout)
            except httpx.TimeoutException as e:
                last_error = BackendTimeoutError(f"Request to {self.url} timed out: {e}")
            except httpx.TransportError as e:
                last_error = NetworkError(f"Request to {self.url} failed: {e}")
            else:
                if response.status_code in RETRYABLE_STATUS:
                    last_error = NetworkError(f"{self.url} answered {response.status_code}")
                elif response.status_code >= 400:
                    raise BackendFailure(f"{self.url} answered {response.status_code}: {response.text[:200]}")
                else:
                    return self._first_message(response)

            if attempt < attempts - 1:
                delay = self.cfg.backoff_base * (2 ** attempt)
                logger.warning("Attempt %d/%d failed (%s); retrying in %.1fs",
                               attempt + 1, attempts, last_error, delay)
                time.sleep(delay)
        raise last_error

    def _first_message(self, response: httpx.Response) -> str:
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise BackendFailure(f"Malformed chat-completions body from {self.url}: {e}") from e

    def close(self) -> None:
        if self._owns_client:
            self.client.close()
