"""
GUI entity extraction: app, page and input-component information for one text input.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DegenerateBounds, NotAnInput
from .vh_parser import (
    AppManifest,
    NodePath,
    ViewHierarchy,
    is_text_input,
    iter_nodes,
    parent_path,
    resolve_path,
)

logger = logging.getLogger(__name__)

MAX_NEARBY_LABELS = 12


@dataclass(frozen=True)
class AppInfo:
    app_name: str = ""
    activities: tuple[str, ...] = ()


@dataclass(frozen=True)
class PageInfo:
    activity_name: str
    components: tuple[str, ...]
    upper: tuple[str, ...]
    lower: tuple[str, ...]


@dataclass(frozen=True)
class InputComponentInfo:
    input_label: str
    nearby_labels: tuple[str, ...]
    node_path: NodePath
    existing_hint: str = ""


@dataclass(frozen=True)
class GuiEntityBundle:
    app: AppInfo
    page: PageInfo
    input: InputComponentInfo
    warnings: tuple[str, ...] = field(default=(), compare=False)


def display_label(node) -> str:
    """
    The first non-empty of the node's text and its resource-id short form.
    content-desc is not consulted.
    """
    text = node.text.strip()
    if text:
        return text
    return node.resource_id.strip().rsplit("/", 1)[-1].strip()


def app_info(manifest: AppManifest | None) -> AppInfo:
    if manifest is None:
        return AppInfo()
    # AppManifest already dedups; keep the guard for hand-built manifests.
    return AppInfo(app_name=manifest.app_name,
                   activities=tuple(dict.fromkeys(manifest.activity_names)))


def extract_page_info(vh: ViewHierarchy) -> PageInfo:
    """
    Lists labeled components top-to-bottom then left-to-right, and splits them
    at the vertical midline of the root. Nodes centered exactly on the midline
    count as upper.
    """
    root_bounds = vh.root.bounds
    if root_bounds.height <= 0:
        raise DegenerateBounds(f"Root of {vh.source_path or vh.activity_name} has no height")
    midline = (root_bounds.top + root_bounds.bottom) / 2

    labeled = []
    for order, (_, node) in enumerate(iter_nodes(vh)):
        label = display_label(node)
        if label:
            center_x, center_y = node.bounds.center
            labeled.append((center_y, center_x, order, label))
    labeled.sort()

    components = tuple(item[3] for item in labeled)
    upper = tuple(label for cy, _, _, label in labeled if cy <= midline)
    lower = tuple(label for cy, _, _, label in labeled if cy > midline)
    return PageInfo(activity_name=vh.activity_name, components=components,
                    upper=upper, lower=lower)


def extract_input_info(vh: ViewHierarchy, node_path: NodePath) -> InputComponentInfo:
    """
    Describes one text input by its own label plus the labels of its parent
    and direct siblings (document order, capped at MAX_NEARBY_LABELS).

    Raises:
        BadPath: If the path does not resolve.
        NotAnInput: If the resolved node is not EditText-like.
    """
    node_path = tuple(node_path)
    node = resolve_path(vh, node_path)
    if not is_text_input(node):
        raise NotAnInput(f"Node {list(node_path)} is a {node.class_name or 'node without class'}")

    own_label = display_label(node)
    nearby: list[str] = []
    parent_at = parent_path(node_path)
    if parent_at is not None:
        parent = resolve_path(vh, parent_at)
        candidates = [display_label(parent)]
        candidates += [display_label(sibling) for index, sibling in enumerate(parent.children)
                       if index != node_path[-1]]
        nearby = [label for label in candidates if label and label != own_label]

    return InputComponentInfo(
        input_label=own_label,
        nearby_labels=tuple(nearby[:MAX_NEARBY_LABELS]),
        node_path=node_path,
        existing_hint=node.hint,
    )


def bundle(app: AppInfo, page: PageInfo, input_info: InputComponentInfo) -> GuiEntityBundle:
    warnings = []
    if app.activities and page.activity_name and page.activity_name not in app.activities:
        warnings.append(f"Activity {page.activity_name!r} is not declared by app {app.app_name!r}")
        logger.warning(warnings[-1])
    return GuiEntityBundle(app=app, page=page, input=input_info, warnings=tuple(warnings))


def extract_bundle(vh: ViewHierarchy, manifest: AppManifest | None, node_path: NodePath) -> GuiEntityBundle:
    return bundle(app_info(manifest), extract_page_info(vh), extract_input_info(vh, node_path))
