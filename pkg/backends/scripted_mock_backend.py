import hashlib
import itertools
from dataclasses import dataclass

import yaml

from hint_engine.errors import MockMiss

from .base import CompletionBackend


@dataclass(frozen=True)
class MockRule:
    response: str
    fingerprint: str | None = None
    contains: tuple[str, ...] = ()

    def matches(self, prompt: str, prompt_digest: str) -> bool:
        if self.fingerprint is not None and self.fingerprint != prompt_digest:
            return False
        return all(fragment in prompt for fragment in self.contains)


@dataclass(frozen=True)
class MockScript:
    """
    Canned answers. Rules are tried in order (prompt fingerprint and/or required
    substrings); then the ordered sequence, one entry per call; then `default`.
    """
    rules: tuple[MockRule, ...] = ()
    sequence: tuple[str, ...] = ()
    default: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "MockScript":
        rules = []
        for index, rule in enumerate(data.get("rules") or []):
            if "response" not in rule:
                raise ValueError(f"rules[{index}] has no response")
            if "fingerprint" not in rule and "contains" not in rule:
                raise ValueError(f"rules[{index}] needs a fingerprint or contains")
            contains = rule.get("contains") or ()
            if isinstance(contains, str):
                contains = (contains,)
            rules.append(MockRule(response=str(rule["response"]), fingerprint=rule.get("fingerprint"),
                                  contains=tuple(str(c) for c in contains)))
        return cls(rules=tuple(rules),
                   sequence=tuple(str(s) for s in data.get("sequence") or ()),
                   default=data.get("default"))

    @classmethod
    def load(cls, path: str) -> "MockScript":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(yaml.safe_load(f) or {})


class ScriptedMockBackend(CompletionBackend):
    """Offline backend answering from a MockScript. Never touches the network."""

    def __init__(self, cfg, script: MockScript | None = None):
        super().__init__(cfg)
        if script is None:
            script = MockScript.load(cfg.mock_script) if cfg.mock_script else MockScript()
        self.script = script
        self._calls = itertools.count()

    def complete(self, prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        for rule in self.script.rules:
            if rule.matches(prompt, digest):
                return rule.response
        if self.script.sequence:
            position = next(self._calls)
            if position < len(self.script.sequence):
                return self.script.sequence[position]
        if self.script.default is not None:
            return str(self.script.default)
        raise MockMiss(f"No canned response for prompt {digest[:12]}")
