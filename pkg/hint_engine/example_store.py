"""
Hint-text example dataset: records, word-vector sentence embeddings and
top-K retrieval for in-context examples.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import weakref
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .entity_extract import GuiEntityBundle, extract_bundle
from .errors import CorruptLine, DimensionMismatch, DuplicateId
from .vh_parser import AppManifest, ViewHierarchy, find_text_inputs, has_hint

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 300
DEFAULT_K = 6

_WORD_RE = re.compile(r"[^\W_]+")
_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")


class Origin(str, Enum):
    MINED = "mined"
    RUNTIME = "runtime"


@dataclass(frozen=True)
class ExampleRecord:
    record_id: str
    input_label: str
    nearby_labels: tuple[str, ...]
    activity_name: str
    app_name: str
    hint_text: str
    origin: Origin = Origin.MINED

    def __post_init__(self):
        if not self.hint_text.strip():
            raise ValueError(f"Example {self.record_id!r} has an empty hint-text")
        object.__setattr__(self, "nearby_labels", tuple(self.nearby_labels))
        object.__setattr__(self, "origin", Origin(self.origin))

    @property
    def content_key(self) -> tuple:
        return (self.input_label, self.nearby_labels, self.hint_text)

    def to_dict(self) -> dict:
        # Field order is part of the file format
        return {
            "record_id": self.record_id,
            "input_label": self.input_label,
            "nearby_labels": list(self.nearby_labels),
            "activity_name": self.activity_name,
            "app_name": self.app_name,
            "hint_text": self.hint_text,
            "origin": self.origin.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExampleRecord":
        return cls(
            record_id=str(data["record_id"]),
            input_label=str(data.get("input_label", "")),
            nearby_labels=tuple(str(label) for label in data.get("nearby_labels", [])),
            activity_name=str(data.get("activity_name", "")),
            app_name=str(data.get("app_name", "")),
            hint_text=str(data["hint_text"]),
            origin=data.get("origin", Origin.MINED.value),
        )


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    entries: dict[str, np.ndarray]
    dimension: int = DEFAULT_DIMENSION

    def __post_init__(self):
        for token, vector in self.entries.items():
            if vector.shape != (self.dimension,):
                raise DimensionMismatch(f"Vector for {token!r} has shape {vector.shape}")

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")


def tokenize_for_embedding(text: str) -> list[str]:
    """Lowercase word pieces; also splits camelCase and underscores (resource-ids)."""
    tokens = []
    for word in _WORD_RE.findall(text):
        pieces = (_CAMEL_RE.findall(word) if word.isascii() else None) or [word]
        tokens.extend(piece.lower() for piece in pieces)
    return tokens


def load_embedding_table(path: str, dimension: int = DEFAULT_DIMENSION) -> EmbeddingTable:
    """
    Loads a plain-text embedding file: one token per line followed by `dimension` numbers.
    Malformed lines are skipped with a warning. The first occurrence of a token wins.
    """
    entries: dict[str, np.ndarray] = {}
    skipped = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token = parts[0].lower()
            if len(parts) != dimension + 1:
                skipped += 1
                logger.warning("%s line %d: expected %d values, got %d",
                               path, line_number, dimension, len(parts) - 1)
                continue
            try:
                vector = np.asarray(parts[1:], dtype=np.float64)
            except ValueError:
                skipped += 1
                logger.warning("%s line %d: non-numeric value", path, line_number)
                continue
            entries.setdefault(token, vector)
    logger.info("Loaded %d embeddings from %s (%d lines skipped)", len(entries), path, skipped)
    return EmbeddingTable(entries=entries, dimension=dimension)


def embed_sentence(text: str, table: EmbeddingTable) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; the zero vector when there are none."""
    vectors = [table.entries[token] for token in tokenize_for_embedding(text) if token in table.entries]
    if not vectors:
        return np.zeros(table.dimension, dtype=np.float64)
    return np.mean(vectors, axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, defined as 0.0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"Cannot compare vectors of shape {a.shape} and {b.shape}")
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / norm, -1.0, 1.0))


def query_text(input_label: str, nearby_labels: Iterable[str]) -> str:
    return " ".join([input_label, *nearby_labels]).strip()


def record_text(record: ExampleRecord) -> str:
    return query_text(record.input_label, record.nearby_labels)


def content_id(input_label: str, nearby_labels: Iterable[str], hint_text: str, prefix: str) -> str:
    key = json.dumps([input_label, list(nearby_labels), hint_text], ensure_ascii=False)
    return f"{prefix}-{hashlib.sha1(key.encode('utf-8')).hexdigest()[:16]}"


class ExampleStore:
    """
    In-memory example dataset with an embedding cache per table.
    Reads may run concurrently; writes take the store lock.
    """

    def __init__(self, records: Iterable[ExampleRecord] = ()):
        self._records: list[ExampleRecord] = []
        self._ids: set[str] = set()
        self._content: set[tuple] = set()
        self._vectors: weakref.WeakKeyDictionary[EmbeddingTable, dict[str, np.ndarray]] = weakref.WeakKeyDictionary()
        self._lock = threading.RLock()
        self.warnings: list[str] = []
        for record in records:
            self.add_example(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(list(self._records))

    def __eq__(self, other) -> bool:
        return isinstance(other, ExampleStore) and list(self) == list(other)

    @property
    def records(self) -> tuple[ExampleRecord, ...]:
        return tuple(self._records)

    def add_example(self, record: ExampleRecord) -> bool:
        """
        Appends a record unless one with the same label, nearby labels and hint exists.

        Returns:
            bool: True if the record was added.

        Raises:
            DuplicateId: If the id is taken by a record with different content.
        """
        with self._lock:
            if record.content_key in self._content:
                logger.debug("Example %s duplicates existing content; skipped", record.record_id)
                return False
            if record.record_id in self._ids:
                raise DuplicateId(f"Record id {record.record_id!r} already exists with different content")
            self._records.append(record)
            self._ids.add(record.record_id)
            self._content.add(record.content_key)
            return True

    def vector_for(self, record: ExampleRecord, table: EmbeddingTable) -> np.ndarray:
        with self._lock:
            cache = self._vectors.setdefault(table, {})
        vector = cache.get(record.record_id)
        if vector is None:
            vector = embed_sentence(record_text(record), table)
            cache[record.record_id] = vector
        return vector

    def snapshot(self) -> "ExampleStore":
        """An independent copy that shares the embedding cache contents."""
        with self._lock:
            copy = ExampleStore()
            copy._records = list(self._records)
            copy._ids = set(self._ids)
            copy._content = set(self._content)
            for table, cache in self._vectors.items():
                copy._vectors[table] = dict(cache)
            return copy


def add_example(store: ExampleStore, record: ExampleRecord) -> ExampleStore:
    store.add_example(record)
    return store


def select_examples(query: GuiEntityBundle, store: ExampleStore, table: EmbeddingTable,
                    cfg: RetrievalConfig = RetrievalConfig()) -> list[ExampleRecord]:
    """
    Returns the top-k records by cosine similarity between the query input's
    context text and each record's context text. Ties: record_id ascending.
    """
    records = store.records
    if not records:
        logger.warning("Example store is empty; no in-context examples selected")
        return []
    query_vector = embed_sentence(query_text(query.input.input_label, query.input.nearby_labels), table)
    scored = [(cosine(query_vector, store.vector_for(record, table)), record) for record in records]
    scored.sort(key=lambda item: (-item[0], item[1].record_id))
    return [record for _, record in scored[:cfg.k]]


def mine_examples(corpus: Iterable[tuple[ViewHierarchy, AppManifest | None]]) -> list[ExampleRecord]:
    """One mined record per text input that already carries a hint."""
    mined = []
    for vh, manifest in corpus:
        for ref in find_text_inputs(vh):
            if not has_hint(ref.node):
                continue
            entity = extract_bundle(vh, manifest, ref.path)
            hint_text = ref.node.hint.strip()
            mined.append(ExampleRecord(
                record_id=content_id(entity.input.input_label, entity.input.nearby_labels, hint_text, "mined"),
                input_label=entity.input.input_label,
                nearby_labels=entity.input.nearby_labels,
                activity_name=vh.activity_name,
                app_name=entity.app.app_name,
                hint_text=hint_text,
                origin=Origin.MINED,
            ))
    return mined


def save_store(store: ExampleStore, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in store:
            f.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
    logger.info("Saved %d examples to %s", len(store), path)


def _parse_line(line: str, line_number: int) -> ExampleRecord:
    try:
        data = json.loads(line)
        if not isinstance(data, dict):
            raise ValueError("record is not an object")
        return ExampleRecord.from_dict(data)
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptLine(line_number, str(e)) from e


def load_store(path: str) -> ExampleStore:
    """Loads a line-delimited store. Corrupt lines are reported and skipped."""
    store = ExampleStore()
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                store.add_example(_parse_line(line, line_number))
            except (CorruptLine, DuplicateId) as e:
                message = f"{path}: {e}"
                logger.warning(message)
                store.warnings.append(message)
    return store
