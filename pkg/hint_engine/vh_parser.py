"""
View hierarchy parsing.

Turns UIAutomator-style XML dumps and plain-text AndroidManifest files into
immutable typed trees, and answers the two questions the rest of the pipeline
keeps asking: which nodes are text inputs, and which of them carry a hint.
"""
from __future__ import annotations

import hashlib
import logging
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .errors import BadPath, MalformedBounds, MalformedXml, MissingPackage

logger = logging.getLogger(__name__)

ANDROID_NS = "{http://schemas.android.com/apk/res/android}"
_BOUNDS_RE = re.compile(r"^\[(-?\d+),(-?\d+)\]\[(-?\d+),(-?\d+)\]$")
TEXT_INPUT_KEYWORD = "edittext"

NodePath = tuple[int, ...]


class Bounds(NamedTuple):
    left: int
    top: int
    right: int
    bottom: int

    @property
    def center(self) -> tuple[float, float]:
        return ((self.left + self.right) / 2, (self.top + self.bottom) / 2)

    @property
    def height(self) -> int:
        return self.bottom - self.top

    def contains(self, other: "Bounds") -> bool:
        return (self.left <= other.left and self.top <= other.top
                and self.right >= other.right and self.bottom >= other.bottom)

    def to_attr(self) -> str:
        return f"[{self.left},{self.top}][{self.right},{self.bottom}]"


@dataclass(frozen=True)
class UiNode:
    class_name: str = ""
    text: str = ""
    resource_id: str = ""
    hint: str = ""
    content_desc: str = ""
    bounds: Bounds = Bounds(0, 0, 0, 0)
    children: tuple["UiNode", ...] = ()


@dataclass(frozen=True)
class ViewHierarchy:
    activity_name: str
    root: UiNode
    source_path: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class AppManifest:
    app_name: str
    activity_names: tuple[str, ...]
    package: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)


class NodeRef(NamedTuple):
    """A node together with its pre-order index path (root path is (0,))."""
    path: NodePath
    node: UiNode


def parse_bounds(value: str) -> Bounds:
    """Parses the "[l,t][r,b]" syntax used by UIAutomator dumps."""
    match = _BOUNDS_RE.match(value.strip())
    if not match:
        raise MalformedBounds(f"Bounds attribute {value!r} does not match [l,t][r,b]")
    left, top, right, bottom = map(int, match.groups())
    if left > right or top > bottom:
        raise MalformedBounds(f"Bounds {value!r} are inverted")
    return Bounds(left, top, right, bottom)


def _build_node(element: ET.Element) -> UiNode:
    bounds_attr = element.get("bounds")
    bounds = parse_bounds(bounds_attr) if bounds_attr is not None else Bounds(0, 0, 0, 0)
    children = tuple(_build_node(child) for child in element if child.tag == "node")
    return UiNode(
        class_name=element.get("class", ""),
        text=element.get("text", ""),
        resource_id=element.get("resource-id", ""),
        hint=element.get("hint", ""),
        content_desc=element.get("content-desc", ""),
        bounds=bounds,
        children=children,
    )


def _containment_warnings(root: UiNode) -> list[str]:
    warnings = []
    for path, node in _walk(root, (0,)):
        if node is not root and not root.bounds.contains(node.bounds):
            warnings.append(f"Node {list(path)} ({node.class_name}) lies outside root bounds")
    return warnings


def parse_hierarchy(xml_text: str, activity_name: str, source_path: str = "") -> ViewHierarchy:
    """
    Parses a UIAutomator dump into a ViewHierarchy.

    Args:
        xml_text: The dump. Either a bare root `<node>` or a `<hierarchy>` wrapper around one.
        activity_name: Activity of the page. Dumps do not carry it, so the caller supplies it.
        source_path: Provenance kept on the result.

    Raises:
        MalformedXml: If the text cannot be parsed or contains no node element.
        MalformedBounds: If a bounds attribute is present but malformed.
    """
    try:
        element = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise MalformedXml(f"Could not parse view hierarchy {source_path or ''}: {e}") from e

    warnings: list[str] = []
    if element.tag == "hierarchy":
        nodes = [child for child in element if child.tag == "node"]
        if not nodes:
            raise MalformedXml("Hierarchy wrapper contains no node element")
        if len(nodes) > 1:
            warnings.append(f"Hierarchy has {len(nodes)} root nodes; using the first")
        element = nodes[0]
    elif element.tag != "node":
        raise MalformedXml(f"Unexpected root element <{element.tag}>")

    root = _build_node(element)
    if not activity_name:
        warnings.append("Activity name is empty")
    warnings.extend(_containment_warnings(root))
    for warning in warnings:
        logger.warning("%s: %s", source_path or "<dump>", warning)
    return ViewHierarchy(activity_name=activity_name, root=root,
                         source_path=source_path, warnings=tuple(warnings))


def load_hierarchy_file(path: str, activity_name: str | None = None) -> ViewHierarchy:
    """Reads a dump file; the activity name defaults to the file stem."""
    with open(path, "r", encoding="utf-8") as f:
        xml_text = f.read()
    if activity_name is None:
        activity_name = os.path.splitext(os.path.basename(path))[0]
    return parse_hierarchy(xml_text, activity_name, source_path=path)


def _short_activity(name: str) -> str:
    return name.rsplit(".", 1)[-1]


def parse_manifest(xml_text: str) -> AppManifest:
    """
    Parses a plain-text AndroidManifest.xml.

    The app name is the application label when it is a literal string,
    otherwise the last segment of the package name. Activity names are
    shortened to the part after the last dot and deduplicated in order.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise MalformedXml(f"Could not parse manifest: {e}") from e

    package = root.get("package", "").strip()
    if not package:
        raise MissingPackage("Manifest has no package attribute")

    application = root.find("application")
    label = ""
    activities: list[str] = []
    if application is not None:
        label = (application.get(f"{ANDROID_NS}label") or application.get("label") or "").strip()
        for activity in application.findall("activity"):
            name = activity.get(f"{ANDROID_NS}name") or activity.get("name") or ""
            short = _short_activity(name.strip())
            if short and short not in activities:
                activities.append(short)

    # Resource references ("@string/app_name") cannot be resolved from plain XML
    app_name = label if label and not label.startswith("@") else package.rsplit(".", 1)[-1]

    warnings = []
    if not activities:
        warnings.append(f"Manifest for {package} declares no activities")
        logger.warning(warnings[-1])
    return AppManifest(app_name=app_name, activity_names=tuple(activities),
                       package=package, warnings=tuple(warnings))


def load_manifest_file(path: str) -> AppManifest:
    with open(path, "r", encoding="utf-8") as f:
        return parse_manifest(f.read())


def _walk(node: UiNode, path: NodePath) -> Iterator[NodeRef]:
    yield NodeRef(path, node)
    for index, child in enumerate(node.children):
        yield from _walk(child, path + (index,))


def iter_nodes(vh: ViewHierarchy) -> Iterator[NodeRef]:
    """Yields every node in pre-order with its index path."""
    return _walk(vh.root, (0,))


def resolve_path(vh: ViewHierarchy, path: NodePath) -> UiNode:
    path = tuple(path)
    if not path or path[0] != 0:
        raise BadPath(f"Path {list(path)} must start at the root index 0")
    node = vh.root
    for depth, index in enumerate(path[1:], start=1):
        if not 0 <= index < len(node.children):
            raise BadPath(f"Path {list(path)} has no child {index} at depth {depth}")
        node = node.children[index]
    return node


def parent_path(path: NodePath) -> NodePath | None:
    return tuple(path[:-1]) if len(path) > 1 else None


def is_text_input(node: UiNode) -> bool:
    return TEXT_INPUT_KEYWORD in node.class_name.lower()


def find_text_inputs(vh: ViewHierarchy) -> list[NodeRef]:
    """Returns EditText-like nodes (class name contains "EditText") in document order."""
    return [ref for ref in iter_nodes(vh) if is_text_input(ref.node)]


def has_hint(node: UiNode) -> bool:
    return bool(node.hint.strip())


def fingerprint(vh: ViewHierarchy) -> str:
    """
    Digest over the activity name and the pre-order (class, display label) sequence.
    Bounds are left out so layout jitter does not change the digest.
    """
    from .entity_extract import display_label

    digest = hashlib.sha256()
    digest.update(vh.activity_name.encode("utf-8"))
    for _, node in iter_nodes(vh):
        digest.update(b"\x1e")
        digest.update(node.class_name.encode("utf-8"))
        digest.update(b"\x1f")
        digest.update(display_label(node).encode("utf-8"))
    return digest.hexdigest()


def _to_element(node: UiNode, index: int) -> ET.Element:
    element = ET.Element("node", {
        "index": str(index),
        "text": node.text,
        "resource-id": node.resource_id,
        "class": node.class_name,
        "content-desc": node.content_desc,
        "hint": node.hint,
        "bounds": node.bounds.to_attr(),
    })
    for child_index, child in enumerate(node.children):
        element.append(_to_element(child, child_index))
    return element


def serialize_hierarchy(vh: ViewHierarchy) -> str:
    """Writes the tree back in UIAutomator dump syntax."""
    wrapper = ET.Element("hierarchy", {"rotation": "0"})
    wrapper.append(_to_element(vh.root, 0))
    return ET.tostring(wrapper, encoding="unicode")
