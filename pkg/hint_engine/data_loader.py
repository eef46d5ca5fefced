import glob
import json
import logging
import os
from dataclasses import dataclass, field

import pandas as pd

from .errors import HintEngineError, LengthMismatch
from .vh_parser import AppManifest, ViewHierarchy, load_hierarchy_file, load_manifest_file

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.xml"


@dataclass
class CorpusApp:
    app_id: str
    manifest: AppManifest | None
    pages: list[ViewHierarchy] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class AppMetadata:
    category: str
    downloads: int | None = None


def _load_page(file_path: str) -> ViewHierarchy | None:
    """Helper function to load a single dump file; None if it cannot be used."""
    try:
        return load_hierarchy_file(file_path)
    except (OSError, UnicodeDecodeError, HintEngineError) as e:
        logger.warning("Could not process %s. Reason: %s", file_path, e)
        return None


def load_app(app_dir: str) -> CorpusApp:
    """
    Loads one `<app-id>/` directory: every `*.xml` page plus an optional manifest.xml.
    Page activity names come from the file stems.
    """
    app = CorpusApp(app_id=os.path.basename(os.path.normpath(app_dir)), manifest=None)
    manifest_path = os.path.join(app_dir, MANIFEST_FILE)
    if os.path.isfile(manifest_path):
        try:
            app.manifest = load_manifest_file(manifest_path)
        except (OSError, UnicodeDecodeError, HintEngineError) as e:
            logger.warning("Could not process %s. Reason: %s", manifest_path, e)
            app.skipped.append(manifest_path)

    for file_path in sorted(glob.glob(os.path.join(app_dir, "*.xml"))):
        if os.path.basename(file_path) == MANIFEST_FILE:
            continue
        page = _load_page(file_path)
        if page is None:
            app.skipped.append(file_path)
        else:
            app.pages.append(page)
    return app


def load_corpus(source_path: str) -> list[CorpusApp]:
    """
    Loads a corpus laid out as `<root>/<app-id>/<page>.xml` (+ optional manifest.xml).

    Args:
        source_path (str): The corpus root, or a single app directory that holds pages directly.

    Returns:
        list[CorpusApp]: Apps sorted by id.

    Raises:
        FileNotFoundError: If the path is not a directory.
    """
    if not os.path.isdir(source_path):
        raise FileNotFoundError(f"Corpus path is not a directory: {source_path}")

    app_dirs = sorted(path for path in glob.glob(os.path.join(source_path, "*")) if os.path.isdir(path))
    if not app_dirs and glob.glob(os.path.join(source_path, "*.xml")):
        app_dirs = [source_path]
    if not app_dirs:
        logger.warning("No app directories found in %s", source_path)
    return [load_app(app_dir) for app_dir in app_dirs]


def iter_pages(corpus: list[CorpusApp]):
    """Yields (page, manifest) pairs in corpus order."""
    for app in corpus:
        for page in app.pages:
            yield page, app.manifest


DOWNLOAD_SCALES = {"K": 1_000, "M": 1_000_000, "B": 1_000_000_000}


def parse_downloads(text: str) -> int | None:
    """
    Reads an install count such as "1,000,000+", "50_000" or "1M+".

    Returns:
        int | None: The count, or None for an empty value.

    Raises:
        ValueError: If the value is not a number.
    """
    cleaned = text.strip().replace(",", "").replace("_", "").rstrip("+").strip().upper()
    if not cleaned:
        return None
    scale = 1
    if cleaned[-1] in DOWNLOAD_SCALES:
        cleaned, scale = cleaned[:-1], DOWNLOAD_SCALES[cleaned[-1]]
    try:
        return int(float(cleaned) * scale)
    except ValueError:
        raise ValueError(f"Unreadable downloads value {text!r}") from None


def load_category_map(path: str) -> dict[str, AppMetadata]:
    """
    Reads `app_id, category[, downloads]` rows. A file containing tabs is
    tab-separated, otherwise comma-separated (quote downloads like "1,000,000+").
    Lines starting with '#' are comments. Unreadable downloads are warned about and dropped.

    Raises:
        ValueError: If a row has more than three columns.
    """
    with open(path, "r", encoding="utf-8") as f:
        sep = "\t" if "\t" in f.read() else ","
    try:
        frame = pd.read_csv(path, sep=sep, header=None, comment="#", dtype=str, index_col=False,
                            names=["app_id", "category", "downloads", "extra"],
                            skip_blank_lines=True, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return {}
    except pd.errors.ParserError as e:
        raise ValueError(f"{path}: {e}") from e
    frame = frame.fillna("")
    crowded = frame[frame["extra"].str.strip() != ""]
    if not crowded.empty:
        app_id = crowded["app_id"].iloc[0]
        raise ValueError(f"{path}: app '{app_id}' has more than three columns; "
                         "quote values that contain the separator")

    mapping = {}
    for row in frame.itertuples(index=False):
        app_id, category = row.app_id.strip(), row.category.strip()
        if not app_id:
            continue
        try:
            downloads = parse_downloads(row.downloads)
        except ValueError as e:
            logger.warning("%s: %s for app '%s'", path, e, app_id)
            downloads = None
        mapping[app_id] = AppMetadata(category=category or "Unknown", downloads=downloads)
    return mapping


def read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path} line {line_number}: {e}") from e
    return records


def write_jsonl(path: str, records) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def location_key(source: str, node_path) -> tuple[str, tuple[int, ...]]:
    """`<app-id>/<page file>` plus the node path; independent of the corpus root."""
    parts = os.path.normpath(source).replace("\\", "/").split("/")
    return "/".join(parts[-2:]), tuple(int(i) for i in node_path)


def pair_hint_records(candidates: list[dict], references: list[dict]) -> list[tuple[dict, dict]]:
    """
    Pairs candidate and reference records. When every record carries `source` and
    `node_path` they are paired by location, otherwise by line order.

    Raises:
        LengthMismatch: If the files differ in length or a location has no reference.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates but {len(references)} references")
    keyed = all("source" in r and "node_path" in r for r in (*candidates, *references))
    if not keyed:
        return list(zip(candidates, references))

    by_location = {location_key(r["source"], r["node_path"]): r for r in references}
    pairs = []
    for candidate in candidates:
        key = location_key(candidate["source"], candidate["node_path"])
        if key not in by_location:
            raise LengthMismatch(f"No reference for {key[0]} {list(key[1])}")
        pairs.append((candidate, by_location[key]))
    return pairs
