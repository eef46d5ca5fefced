from abc import ABC, abstractmethod


class CompletionBackend(ABC):
    """
    A text-in, text-out completion service. Implementations raise the
    hint_engine.errors.BackendError family on failure.
    """

    def __init__(self, cfg):
        self.cfg = cfg

    @abstractmethod
    def complete(self, prompt: str) -> str:
        """Returns the model's answer to a single user message."""

    def close(self) -> None:
        pass
