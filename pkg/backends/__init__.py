"""
Completion backends, one module per kind.

Modules are imported by name on first use so optional client libraries
(google-genai) are only needed when that backend is configured.
"""
import importlib

BACKEND_MODULES = {
    "http_chat": ("http_chat_backend", "HttpChatBackend"),
    "scripted_mock": ("scripted_mock_backend", "ScriptedMockBackend"),
    "gemini": ("gemini_backend", "GeminiBackend"),
}


def create_backend(cfg):
    """Instantiates the backend class registered for `cfg.kind`."""
    kind = getattr(cfg.kind, "value", cfg.kind)
    if kind not in BACKEND_MODULES:
        raise ValueError(f"Unknown backend kind: {kind}")
    module_name, class_name = BACKEND_MODULES[kind]
    module = importlib.import_module(f"backends.{module_name}")
    return getattr(module, class_name)(cfg)
