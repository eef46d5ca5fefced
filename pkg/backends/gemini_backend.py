import logging
import os
import time

from hint_engine.errors import BackendFailure, NetworkError

from .base import CompletionBackend

logger = logging.getLogger(__name__)

RETRYABLE_TOKENS = ("503", "UNAVAILABLE", "model is overloaded", "overloaded", "429", "RESOURCE_EXHAUSTED")


class GeminiBackend(CompletionBackend):
    """Google Gemini through google-genai. The API key comes from `api_key_env`."""

    def __init__(self, cfg):
        super().__init__(cfg)
        from google import genai
        from google.genai import types

        env_name = cfg.api_key_env or "GEMINI_API_KEY"
        api_key = os.getenv(env_name)
        if not api_key:
            raise ValueError(f"Google API key not found in environment variable {env_name}.")
        self._types = types
        self.client = genai.Client(api_key=api_key)

    def complete(self, prompt: str) -> str:
        config = self._types.GenerateContentConfig(temperature=self.cfg.temperature)
        attempts = self.cfg.max_retries + 1
        for attempt in range(1, attempts + 1):
            try:
                response = self.client.models.generate_content(
                    model=self.cfg.model_name or "gemini-2.5-flash",
                    contents=prompt,
                    config=config,
                )
                return (response.text or "").strip()
            except Exception as e:
                err_str = str(e)
                retryable = any(token in err_str for token in RETRYABLE_TOKENS)
                if retryable and attempt < attempts:
                    delay = self.cfg.backoff_base * (2 ** (attempt - 1))
                    logger.warning("Gemini attempt %d/%d failed (%s); retrying in %.1fs",
                                   attempt, attempts, err_str[:80], delay)
                    time.sleep(delay)
                    continue
                if retryable:
                    raise NetworkError(f"Gemini generation failed: {e}") from e
                raise BackendFailure(f"Gemini generation failed: {e}") from e
        raise BackendFailure("Gemini generation failed without an answer")
