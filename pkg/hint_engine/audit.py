"""
Missing hint-text audit over a corpus of view hierarchy dumps.

An app "has missing" when at least one of its text inputs lacks a hint;
a page counts only when it contains a text input. Pages that repeat an
earlier page of the same app (same fingerprint) are counted once.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import pandas as pd

from .data_loader import AppMetadata, load_app
from .vh_parser import find_text_inputs, fingerprint, has_hint

logger = logging.getLogger(__name__)

UNKNOWN_CATEGORY = "Unknown"

GOOGLE_PLAY_CATEGORIES = (
    "Art & Design", "Auto & Vehicles", "Beauty", "Books & Reference", "Business", "Comics",
    "Communication", "Dating", "Education", "Entertainment", "Events", "Finance", "Food & Drink",
    "Health & Fitness", "House & Home", "Libraries & Demo", "Lifestyle", "Maps & Navigation",
    "Medical", "Music & Audio", "News & Magazines", "Parenting", "Personalization", "Photography",
    "Productivity", "Shopping", "Social", "Sports", "Tools", "Travel & Local", "Video Players & Editors",
    "Weather", "Games",
)

# Google Play install thresholds, ascending
DOWNLOAD_BUCKETS = ((1_000, "1K+"), (10_000, "10K+"), (100_000, "100K+"),
                    (1_000_000, "1M+"), (10_000_000, "10M+"), (100_000_000, "100M+"))


@dataclass(frozen=True)
class AppAudit:
    app_id: str
    category: str
    pages: int
    inputs: int
    inputs_missing_hint: int
    pages_missing_hint: int = 0
    downloads: int | None = None
    skipped_files: int = 0

    @property
    def has_inputs(self) -> bool:
        return self.inputs > 0

    @property
    def has_missing(self) -> bool:
        return self.inputs_missing_hint > 0


@dataclass
class AuditReport:
    apps: list[AppAudit]
    apps_with_inputs: int
    apps_with_any_missing: int
    overall_missing_rate: float
    category_rates: dict[str, float]
    screens_with_inputs: int = 0
    screens_with_missing: int = 0
    screen_missing_rate: float = 0.0
    inputs_total: int = 0
    inputs_missing: int = 0
    input_missing_rate: float = 0.0
    download_rates: dict[str, float] | None = None
    skipped_files: int = 0
    warnings: list[str] = field(default_factory=list)


def download_bucket(downloads: int) -> str:
    label = "<1K"
    for threshold, name in DOWNLOAD_BUCKETS:
        if downloads >= threshold:
            label = name
    return label


def _rate(part: int, whole: int) -> float:
    return part / whole if whole else 0.0


def audit_app(app_dir: str, metadata: AppMetadata | None = None) -> AppAudit:
    app = load_app(app_dir)
    seen: set[str] = set()
    pages = inputs = missing = pages_missing = 0
    for page in app.pages:
        digest = fingerprint(page)
        if digest in seen:
            continue
        seen.add(digest)
        refs = find_text_inputs(page)
        if not refs:
            continue
        page_missing = sum(1 for ref in refs if not has_hint(ref.node))
        pages += 1
        inputs += len(refs)
        missing += page_missing
        pages_missing += int(page_missing > 0)
    return AppAudit(
        app_id=app.app_id,
        category=metadata.category if metadata else UNKNOWN_CATEGORY,
        pages=pages,
        inputs=inputs,
        inputs_missing_hint=missing,
        pages_missing_hint=pages_missing,
        downloads=metadata.downloads if metadata else None,
        skipped_files=len(app.skipped),
    )


def summarize(apps: list[AppAudit], warnings: list[str] | None = None) -> AuditReport:
    """Aggregates per-app audits; the result does not depend on input order."""
    apps = sorted(apps, key=lambda a: a.app_id)
    warnings = list(warnings or [])
    frame = pd.DataFrame([vars(app) for app in apps],
                         columns=["app_id", "category", "pages", "inputs", "inputs_missing_hint",
                                  "pages_missing_hint", "downloads", "skipped_files"])
    with_inputs = frame[frame["inputs"] > 0].copy()
    with_inputs["has_missing"] = with_inputs["inputs_missing_hint"] > 0

    category_rates = {
        str(category): float(group["has_missing"].mean())
        for category, group in with_inputs.groupby("category", sort=True)
    }

    download_rates = None
    known_downloads = with_inputs.dropna(subset=["downloads"])
    if not known_downloads.empty:
        buckets = known_downloads["downloads"].astype(int).map(download_bucket)
        download_rates = {
            str(bucket): float(rate)
            for bucket, rate in known_downloads.groupby(buckets, sort=True)["has_missing"].mean().items()
        }

    apps_with_inputs = int(len(with_inputs))
    apps_missing = int(with_inputs["has_missing"].sum())
    screens = int(frame["pages"].sum())
    screens_missing = int(frame["pages_missing_hint"].sum())
    inputs_total = int(frame["inputs"].sum())
    inputs_missing = int(frame["inputs_missing_hint"].sum())
    if apps_with_inputs == 0:
        warnings.append("No app in the corpus has a text input")

    return AuditReport(
        apps=apps,
        apps_with_inputs=apps_with_inputs,
        apps_with_any_missing=apps_missing,
        overall_missing_rate=_rate(apps_missing, apps_with_inputs),
        category_rates=category_rates,
        screens_with_inputs=screens,
        screens_with_missing=screens_missing,
        screen_missing_rate=_rate(screens_missing, screens),
        inputs_total=inputs_total,
        inputs_missing=inputs_missing,
        input_missing_rate=_rate(inputs_missing, inputs_total),
        download_rates=download_rates,
        skipped_files=int(frame["skipped_files"].sum()),
        warnings=warnings,
    )


def scan_corpus(corpus_root: str, category_map: dict[str, AppMetadata] | None = None,
                jobs: int = 1) -> AuditReport:
    """
    Audits every `<corpus_root>/<app-id>/` directory.

    Args:
        corpus_root: Corpus directory.
        category_map: app id -> category (and optional downloads). Unmapped apps are "Unknown".
        jobs: Apps scanned in parallel.

    Raises:
        FileNotFoundError: If corpus_root is not a directory.
    """
    if not os.path.isdir(corpus_root):
        raise FileNotFoundError(f"Corpus path is not a directory: {corpus_root}")
    category_map = category_map or {}
    warnings = []

    app_dirs = sorted(entry.path for entry in os.scandir(corpus_root) if entry.is_dir())
    if not app_dirs:
        warnings.append(f"Corpus {corpus_root} contains no app directories")
        logger.warning(warnings[-1])

    unknown = sorted({meta.category for meta in category_map.values()} - set(GOOGLE_PLAY_CATEGORIES))
    if unknown:
        warnings.append(f"Categories outside the Google Play list: {', '.join(unknown)}")
        logger.warning(warnings[-1])

    def _scan(app_dir: str) -> AppAudit:
        return audit_app(app_dir, category_map.get(os.path.basename(app_dir)))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        apps = list(pool.map(_scan, app_dirs))

    skipped = sum(app.skipped_files for app in apps)
    if skipped:
        warnings.append(f"Skipped {skipped} unreadable file(s)")
        logger.warning(warnings[-1])
    return summarize(apps, warnings)
