"""
Validation environment.

A declarative simulated app renders screens as ViewHierarchy values, accepts
injected text on a field, moves to the field's target screen when its validator
accepts the text, and otherwise shows the field's error message as a popup for
exactly one render. `DeviceAdapter` is the boundary a real-device driver would
implement; only the simulator exists here.

Sim-app spec schema (YAML, schema_version 1):

    schema_version: 1
    app_name: Flight
    package: com.example.flight        # optional, used for resource-ids
    initial_screen: search
    screens:
      - id: search
        activity: SearchFlight
        nodes:                          # static widgets, rendered first
          - {class: android.widget.TextView, text: Flight Search}
          - {class: android.widget.Button, text: Search, id: search}
        inputs:
          - field_id: depart
            label: Depart
            validator: {enum: [Beijing, Paris]}
            error_message: Please enter the correct city name
            transition: results

A validator is the string `nonempty` or a mapping with exactly one of
`pattern` (full match), `enum` (list of accepted strings) or `range`
({min, max}, numeric and inclusive).
"""
from __future__ import annotations

import logging
import re
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import yaml

from .entity_extract import display_label
from .errors import SchemaError, UnknownField, UnknownScreen
from .vh_parser import Bounds, NodePath, UiNode, ViewHierarchy, fingerprint, iter_nodes, resolve_path

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TRANSITION_JACCARD = 0.5

SCREEN_BOUNDS = Bounds(0, 0, 1080, 1920)
ROW_TOP, ROW_HEIGHT, ROW_GAP = 100, 120, 20
POPUP_BOUNDS = Bounds(140, 900, 940, 1020)
EDIT_TEXT_CLASS = "android.widget.EditText"
POPUP_CLASS = "android.widget.TextView"


@dataclass(frozen=True)
class Validator:
    kind: str
    pattern: str | None = None
    values: tuple[str, ...] = ()
    minimum: float | None = None
    maximum: float | None = None

    def accepts(self, text: str) -> bool:
        if self.kind == "nonempty":
            return bool(text.strip())
        if self.kind == "pattern":
            return re.fullmatch(self.pattern, text) is not None
        if self.kind == "enum":
            return text in self.values
        if self.kind == "range":
            try:
                value = float(text)
            except ValueError:
                return False
            return self.minimum <= value <= self.maximum
        raise ValueError(f"Unknown validator kind {self.kind}")


@dataclass(frozen=True)
class SimNode:
    class_name: str
    text: str = ""
    node_id: str = ""


@dataclass(frozen=True)
class SimInputField:
    field_id: str
    label: str
    validator: Validator
    error_message: str
    transition_target: str


@dataclass(frozen=True)
class SimScreen:
    screen_id: str
    activity_name: str
    nodes: tuple[SimNode, ...] = ()
    inputs: tuple[SimInputField, ...] = ()

    def input_field(self, field_id: str) -> SimInputField:
        for input_field in self.inputs:
            if input_field.field_id == field_id:
                return input_field
        raise UnknownField(f"Screen {self.screen_id!r} has no field {field_id!r}")


@dataclass(frozen=True)
class SimAppSpec:
    app_name: str
    screens: tuple[SimScreen, ...]
    initial_screen: str
    package: str = ""

    def screen(self, screen_id: str) -> SimScreen:
        for screen in self.screens:
            if screen.screen_id == screen_id:
                return screen
        raise UnknownScreen(f"App {self.app_name!r} has no screen {screen_id!r}")

    def screen_for_activity(self, activity_name: str) -> SimScreen:
        for screen in self.screens:
            if screen.activity_name == activity_name:
                return screen
        raise UnknownScreen(f"App {self.app_name!r} has no screen for activity {activity_name!r}")


@dataclass
class SimState:
    """Single-owner simulation state. Rendering consumes the pending popup."""
    screen_id: str
    pending_popup: str | None = None
    history: tuple[tuple[str, str], ...] = field(default=())


# --- Spec loading ---

def _require(mapping: Any, key: str, path: str) -> Any:
    if not isinstance(mapping, dict):
        raise SchemaError(path, "expected a mapping")
    if key not in mapping or mapping[key] in (None, ""):
        raise SchemaError(f"{path}.{key}", "is required")
    return mapping[key]


def _parse_validator(raw: Any, path: str) -> Validator:
    if raw == "nonempty":
        return Validator(kind="nonempty")
    if not isinstance(raw, dict) or len(raw) != 1:
        raise SchemaError(path, "must be 'nonempty' or a mapping with exactly one of pattern, enum, range")
    kind, value = next(iter(raw.items()))
    if kind == "nonempty":
        return Validator(kind="nonempty")
    if kind == "pattern":
        try:
            re.compile(str(value))
        except re.error as e:
            raise SchemaError(f"{path}.pattern", f"invalid regular expression: {e}") from e
        return Validator(kind="pattern", pattern=str(value))
    if kind == "enum":
        if not isinstance(value, list) or not value:
            raise SchemaError(f"{path}.enum", "must be a non-empty list")
        return Validator(kind="enum", values=tuple(str(v) for v in value))
    if kind == "range":
        minimum = _require(value, "min", f"{path}.range")
        maximum = _require(value, "max", f"{path}.range")
        try:
            minimum, maximum = float(minimum), float(maximum)
        except (TypeError, ValueError) as e:
            raise SchemaError(f"{path}.range", "min and max must be numbers") from e
        if minimum > maximum:
            raise SchemaError(f"{path}.range", "min is greater than max")
        return Validator(kind="range", minimum=minimum, maximum=maximum)
    raise SchemaError(path, f"unknown validator {kind!r}")


def _parse_screen(raw: Any, path: str) -> SimScreen:
    screen_id = str(_require(raw, "id", path))
    activity = str(_require(raw, "activity", path))
    nodes = []
    for index, node in enumerate(raw.get("nodes") or []):
        node_path = f"{path}.nodes[{index}]"
        nodes.append(SimNode(class_name=str(_require(node, "class", node_path)),
                             text=str(node.get("text", "")), node_id=str(node.get("id", ""))))
    inputs = []
    seen_fields = set()
    for index, item in enumerate(raw.get("inputs") or []):
        item_path = f"{path}.inputs[{index}]"
        field_id = str(_require(item, "field_id", item_path))
        if field_id in seen_fields:
            raise SchemaError(f"{item_path}.field_id", f"duplicate field {field_id!r}")
        seen_fields.add(field_id)
        inputs.append(SimInputField(
            field_id=field_id,
            label=str(item.get("label", "")),
            validator=_parse_validator(_require(item, "validator", item_path), f"{item_path}.validator"),
            error_message=str(item.get("error_message") or ""),
            transition_target=str(_require(item, "transition", item_path)),
        ))
    return SimScreen(screen_id=screen_id, activity_name=activity, nodes=tuple(nodes), inputs=tuple(inputs))


def sim_app_from_dict(data: Any) -> SimAppSpec:
    if not isinstance(data, dict):
        raise SchemaError("$", "spec must be a mapping")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"unsupported version {version!r}")
    app_name = str(_require(data, "app_name", "$"))
    raw_screens = data.get("screens")
    if not isinstance(raw_screens, list) or not raw_screens:
        raise SchemaError("$.screens", "must be a non-empty list")
    screens = [_parse_screen(raw, f"$.screens[{index}]") for index, raw in enumerate(raw_screens)]

    ids = [screen.screen_id for screen in screens]
    for index, screen_id in enumerate(ids):
        if screen_id in ids[:index]:
            raise SchemaError(f"$.screens[{index}].id", f"duplicate screen {screen_id!r}")
    initial = str(_require(data, "initial_screen", "$"))
    if initial not in ids:
        raise SchemaError("$.initial_screen", f"screen {initial!r} does not exist")
    for s_index, screen in enumerate(screens):
        for i_index, input_field in enumerate(screen.inputs):
            if input_field.transition_target not in ids:
                raise SchemaError(f"$.screens[{s_index}].inputs[{i_index}].transition",
                                  f"screen {input_field.transition_target!r} does not exist")
    return SimAppSpec(app_name=app_name, screens=tuple(screens), initial_screen=initial,
                      package=str(data.get("package", "")))


def load_sim_app(spec_text: str) -> SimAppSpec:
    """Parses and validates a YAML sim-app spec; SchemaError names the offending field."""
    try:
        data = yaml.safe_load(spec_text)
    except yaml.YAMLError as e:
        raise SchemaError("$", f"not valid YAML: {e}") from e
    return sim_app_from_dict(data)


def load_sim_app_file(path: str) -> SimAppSpec:
    with open(path, "r", encoding="utf-8") as f:
        return load_sim_app(f.read())


# --- Page comparison ---

def _labels(vh: ViewHierarchy) -> set[str]:
    return {label for label in (display_label(node) for _, node in iter_nodes(vh)) if label}


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def detect_transition(before: ViewHierarchy, after: ViewHierarchy) -> bool:
    """A new activity, or a label set that changed by more than half (Jaccard < 0.5)."""
    if before.activity_name != after.activity_name:
        return True
    return jaccard(_labels(before), _labels(after)) < TRANSITION_JACCARD


def diff_error_message(before: ViewHierarchy, after: ViewHierarchy) -> str | None:
    """Text of nodes that appear in `after` but not in `before`, matched by (class, text)."""
    remaining = Counter((node.class_name, node.text) for _, node in iter_nodes(before))
    emerged = []
    for _, node in iter_nodes(after):
        key = (node.class_name, node.text)
        if remaining[key] > 0:
            remaining[key] -= 1
        elif node.text.strip():
            emerged.append(node.text.strip())
    return " ".join(emerged) if emerged else None


# --- Devices ---

class DeviceAdapter(ABC):
    """Operations the feedback loop needs from a device, simulated or real."""

    @abstractmethod
    def start(self, activity_name: str | None = None):
        """Returns a fresh state, positioned on the given activity when one is named."""

    @abstractmethod
    def current_page(self, state) -> ViewHierarchy:
        pass

    @abstractmethod
    def inject_and_submit(self, state, field_id: str, text: str, settle_timeout: float = 0.0):
        """Types `text` into the field, submits, and returns the resulting state."""

    def detect_transition(self, before: ViewHierarchy, after: ViewHierarchy) -> bool:
        return detect_transition(before, after)

    def diff_error_message(self, before: ViewHierarchy, after: ViewHierarchy) -> str | None:
        return diff_error_message(before, after)

    def field_for(self, page: ViewHierarchy, node_path: NodePath) -> str:
        """The field id of the input at `node_path`: its resource-id short form."""
        return resolve_path(page, node_path).resource_id.rsplit("/", 1)[-1]

    def has_field(self, state, field_id: str) -> bool:
        return True


class SimulatedDevice(DeviceAdapter):
    """Synchronous simulator over a SimAppSpec; `settle_timeout` is ignored."""

    def __init__(self, app: SimAppSpec):
        self.app = app

    def start(self, activity_name: str | None = None) -> SimState:
        if activity_name:
            return SimState(screen_id=self.app.screen_for_activity(activity_name).screen_id)
        return SimState(screen_id=self.app.initial_screen)

    def has_field(self, state: SimState, field_id: str) -> bool:
        return any(f.field_id == field_id for f in self.app.screen(state.screen_id).inputs)

    def _resource_id(self, short_id: str) -> str:
        if not short_id:
            return ""
        return f"{self.app.package}:id/{short_id}" if self.app.package else short_id

    def render(self, state: SimState) -> ViewHierarchy:
        """Renders without consuming the popup."""
        screen = self.app.screen(state.screen_id)
        rows: list[UiNode] = []
        widgets = [(n.class_name, n.text, n.node_id) for n in screen.nodes]
        widgets += [(EDIT_TEXT_CLASS, f.label, f.field_id) for f in screen.inputs]
        for row, (class_name, text, short_id) in enumerate(widgets):
            top = ROW_TOP + row * (ROW_HEIGHT + ROW_GAP)
            rows.append(UiNode(class_name=class_name, text=text, resource_id=self._resource_id(short_id),
                               bounds=Bounds(40, top, 1040, top + ROW_HEIGHT)))
        if state.pending_popup:
            rows.append(UiNode(class_name=POPUP_CLASS, text=state.pending_popup,
                               resource_id="android:id/message", bounds=POPUP_BOUNDS))
        root = UiNode(class_name="android.widget.FrameLayout", resource_id=self._resource_id("content"),
                      bounds=SCREEN_BOUNDS, children=tuple(rows))
        return ViewHierarchy(activity_name=screen.activity_name, root=root,
                             source_path=f"sim://{self.app.app_name}/{screen.screen_id}")

    def current_page(self, state: SimState) -> ViewHierarchy:
        page = self.render(state)
        state.pending_popup = None
        return page

    def inject_and_submit(self, state: SimState, field_id: str, text: str,
                          settle_timeout: float = 0.0) -> SimState:
        input_field = self.app.screen(state.screen_id).input_field(field_id)
        if input_field.validator.accepts(text):
            next_state = SimState(screen_id=input_field.transition_target)
        else:
            next_state = SimState(screen_id=state.screen_id, pending_popup=input_field.error_message or None)
        action = f"input {field_id} {text!r}"
        digest = fingerprint(self.render(next_state))
        return replace(next_state, history=state.history + ((action, digest),))


@dataclass
class DeviceSession:
    """A device plus the one state it currently owns."""
    device: DeviceAdapter
    state: Any

    def page(self) -> ViewHierarchy:
        return self.device.current_page(self.state)

    def submit(self, field_id: str, text: str) -> None:
        self.state = self.device.inject_and_submit(self.state, field_id, text)


def replay_trace(device: SimulatedDevice, steps: Iterable[dict], activity_name: str | None = None) -> SimState:
    """
    Applies `{field, text}` steps in order from a fresh state.

    Raises:
        UnknownField: With the 1-based step number in the message.
    """
    state = device.start(activity_name)
    for number, step in enumerate(steps, start=1):
        try:
            state = device.inject_and_submit(state, str(step["field"]), str(step.get("text", "")))
        except (UnknownField, KeyError) as e:
            raise UnknownField(f"step {number}: {e}") from e
        logger.debug("step %d -> %s", number, state.screen_id)
    return state
