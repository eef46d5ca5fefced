"""
LLM gateway: backend configuration, a bounded-concurrency completion call,
and parsing of the `the hint-text is "...", the input content is "..."` answer format.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass, field, fields
from enum import Enum

from .errors import UnparseableAfterReminder, UnparseableResponse
from .prompt_forge import with_format_reminder

logger = logging.getLogger(__name__)

MAX_RETRIES_LIMIT = 5

_HINT_MARKER = re.compile(r"hint[- ]?text\s+is", re.IGNORECASE)
_CONTENT_MARKER = re.compile(r"input\s+content\s+is", re.IGNORECASE)
_QUOTED = re.compile(r'["“”]([^"“”]*)["“”]|‘([^’]*)’')


class BackendKind(str, Enum):
    HTTP_CHAT = "http_chat"
    SCRIPTED_MOCK = "scripted_mock"
    GEMINI = "gemini"


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind = BackendKind.SCRIPTED_MOCK
    endpoint: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    temperature: float = 0.0
    api_key_env: str = "OPENAI_API_KEY"
    mock_script: str | None = None
    max_in_flight: int = 4
    trace_path: str | None = None
    backoff_base: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BackendKind(self.kind))
        if self.timeout <= 0:
            raise ValueError(f"backend.timeout must be positive, got {self.timeout}")
        if not 0 <= self.max_retries <= MAX_RETRIES_LIMIT:
            raise ValueError(f"backend.max_retries must be within 0..{MAX_RETRIES_LIMIT}, got {self.max_retries}")
        if self.temperature < 0:
            raise ValueError(f"backend.temperature must be >= 0, got {self.temperature}")
        if self.max_in_flight < 1:
            raise ValueError(f"backend.max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.kind is BackendKind.HTTP_CHAT and not self.endpoint:
            raise ValueError("backend.endpoint is required for http_chat")

    @classmethod
    def from_dict(cls, data: dict) -> "BackendConfig":
        data = dict(data or {})
        if "model" in data and "model_name" not in data:
            data["model_name"] = data.pop("model")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown backend settings: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class HintResult:
    hint_text: str
    input_content: str
    raw_response: str = field(default="", compare=False)


@dataclass
class HintReply:
    result: HintResult
    raw_responses: list[str]
    prompts: list[str]

    @property
    def calls(self) -> int:
        return len(self.raw_responses)


def prompt_fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _quoted_after(marker: re.Pattern, raw: str) -> str | None:
    match = marker.search(raw)
    if not match:
        return None
    quoted = _QUOTED.search(raw, match.end())
    if not quoted:
        return None
    return quoted.group(1) if quoted.group(1) is not None else quoted.group(2)


def parse_hint_response(raw: str) -> HintResult:
    """
    Extracts the hint-text and input content from an answer.

    The first quoted span after "hint-text is" is the hint and the first quoted span
    after "input content is" is the input content, wherever the markers appear.

    Raises:
        UnparseableResponse: If there is no hint marker, no quoted span after it,
            or the quoted hint is blank.
    """
    hint = _quoted_after(_HINT_MARKER, raw)
    if hint is None or not hint.strip():
        raise UnparseableResponse(f"No hint-text found in response: {raw[:120]!r}")
    content = _quoted_after(_CONTENT_MARKER, raw) or ""
    return HintResult(hint_text=hint.strip(), input_content=content.strip(), raw_response=raw)


class LlmGateway:
    """
    Shared entry point to one completion backend. At most `max_in_flight`
    requests run at once; request/response pairs go to `trace_path` when set.
    """

    def __init__(self, cfg: BackendConfig, backend=None):
        from backends import create_backend

        self.cfg = cfg
        self.backend = backend if backend is not None else create_backend(cfg)
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self._trace_lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._slots:
            response = self.backend.complete(prompt)
        self._trace(prompt, response)
        return response

    def query_hint(self, prompt: str, allow_reminder: bool = True) -> HintReply:
        """
        Completes a prompt and parses the answer. An unreadable answer is retried
        once with a format reminder appended when `allow_reminder` is set.
        """
        raw = self.complete(prompt)
        try:
            return HintReply(parse_hint_response(raw), [raw], [prompt])
        except UnparseableResponse:
            if not allow_reminder:
                raise UnparseableAfterReminder(f"Unreadable response and no reminder left: {raw[:120]!r}")
            logger.info("Response not in the expected format; re-querying with a reminder")

        reminder_prompt = with_format_reminder(prompt)
        second = self.complete(reminder_prompt)
        try:
            return HintReply(parse_hint_response(second), [raw, second], [prompt, reminder_prompt])
        except UnparseableResponse as e:
            raise UnparseableAfterReminder(str(e)) from e

    def _trace(self, prompt: str, response: str) -> None:
        if not self.cfg.trace_path:
            return
        entry = {
            "backend": self.cfg.kind.value,
            "model": self.cfg.model_name,
            "prompt_fingerprint": prompt_fingerprint(prompt),
            "prompt": prompt,
            "response": response,
        }
        with self._trace_lock, open(self.cfg.trace_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def close(self) -> None:
        self.backend.close()


def complete(prompt: str, cfg: BackendConfig) -> str:
    """One-off completion through a temporary gateway."""
    gateway = LlmGateway(cfg)
    try:
        return gateway.complete(prompt)
    finally:
        gateway.close()
