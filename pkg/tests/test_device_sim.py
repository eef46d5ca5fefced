import copy
import os

import pytest

from hint_engine.device_sim import (
    SimulatedDevice,
    detect_transition,
    diff_error_message,
    jaccard,
    load_sim_app,
    load_sim_app_file,
    replay_trace,
    sim_app_from_dict,
)
from hint_engine.errors import SchemaError, UnknownField, UnknownScreen
from hint_engine.vh_parser import find_text_inputs, fingerprint
from tests.builders import FLIGHT_SPEC, node, page

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data")


def test_render_initial_screen(flight_device):
    state = flight_device.start()
    vh = flight_device.current_page(state)
    assert vh.activity_name == "SearchFlight"
    assert [child.text for child in vh.root.children] == ["Flight Search", "Search", "Depart"]
    (ref,) = find_text_inputs(vh)
    assert ref.node.resource_id == "com.example.flight:id/depart"
    assert flight_device.field_for(vh, ref.path) == "depart"


def test_rejected_input_shows_popup_once(flight_device):
    state = flight_device.start()
    before = flight_device.current_page(state)
    state = flight_device.inject_and_submit(state, "depart", "train")
    after = flight_device.current_page(state)
    assert state.screen_id == "search"
    assert not detect_transition(before, after)
    assert diff_error_message(before, after) == "Please enter the correct city name"
    again = flight_device.current_page(state)
    assert diff_error_message(before, again) is None


def test_accepted_input_transitions(flight_device):
    state = flight_device.start()
    before = flight_device.current_page(state)
    state = flight_device.inject_and_submit(state, "depart", "Paris")
    after = flight_device.current_page(state)
    assert after.activity_name == "FlightResults"
    assert detect_transition(before, after)
    assert len(state.history) == 1


def test_unknown_field_and_screen(flight_device):
    with pytest.raises(UnknownField):
        flight_device.inject_and_submit(flight_device.start(), "arrive", "Paris")
    with pytest.raises(UnknownScreen):
        flight_device.start("CheckoutActivity")
    assert flight_device.start("FlightResults").screen_id == "results"


def test_validators():
    spec = {
        "app_name": "Forms",
        "initial_screen": "a",
        "screens": [
            {"id": "a", "activity": "A", "inputs": [
                {"field_id": "age", "validator": {"range": {"min": 1, "max": 120}}, "transition": "b"},
                {"field_id": "zip", "validator": {"pattern": r"\d{5}"}, "transition": "b"},
                {"field_id": "name", "validator": "nonempty", "transition": "b"},
            ]},
            {"id": "b", "activity": "B"},
        ],
    }
    screen = sim_app_from_dict(spec).screen("a")
    age, zip_code, name = (screen.input_field(f).validator for f in ("age", "zip", "name"))
    assert age.accepts("30") and age.accepts("120") and not age.accepts("0") and not age.accepts("old")
    assert zip_code.accepts("10001") and not zip_code.accepts("1000") and not zip_code.accepts("100011")
    assert name.accepts("Ann") and not name.accepts("   ")


@pytest.mark.parametrize("mutate, path", [
    (lambda s: s.update(schema_version=2), "$.schema_version"),
    (lambda s: s.update(initial_screen="nowhere"), "$.initial_screen"),
    (lambda s: s["screens"][0]["inputs"][0].update(transition="nowhere"), "$.screens[0].inputs[0].transition"),
    (lambda s: s["screens"][0]["inputs"][0].update(validator={"enum": []}), "$.screens[0].inputs[0].validator.enum"),
    (lambda s: s["screens"][0]["inputs"][0].update(validator={"regex": "x"}), "$.screens[0].inputs[0].validator"),
    (lambda s: s["screens"][1].pop("activity"), "$.screens[1].activity"),
])
def test_schema_errors_name_the_field(mutate, path):
    spec = copy.deepcopy(FLIGHT_SPEC)
    mutate(spec)
    with pytest.raises(SchemaError) as excinfo:
        sim_app_from_dict(spec)
    assert excinfo.value.path == path


def test_invalid_yaml():
    with pytest.raises(SchemaError):
        load_sim_app("screens: [unclosed")


def test_bundled_demo_spec_loads():
    app = load_sim_app_file(os.path.join(DATA_DIR, "sims", "flight.yaml"))
    assert app.screen_for_activity("Passengers").input_field("count").validator.kind == "range"


def test_jaccard_and_label_change_transition():
    assert jaccard(set(), set()) == 1.0
    assert jaccard({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 3)
    before = page([node("android.widget.TextView", "Step 1", bounds=(0, 0, 10, 10)),
                   node("android.widget.EditText", "Name", bounds=(0, 20, 10, 30))], activity="Wizard")
    after = page([node("android.widget.TextView", "Step 2", bounds=(0, 0, 10, 10)),
                  node("android.widget.EditText", "Phone", bounds=(0, 20, 10, 30))], activity="Wizard")
    assert detect_transition(before, after)


def test_diff_error_message_counts_duplicates():
    before = page([node("android.widget.TextView", "Error", bounds=(0, 0, 10, 10))])
    after = page([node("android.widget.TextView", "Error", bounds=(0, 0, 10, 10)),
                  node("android.widget.TextView", "Error", bounds=(0, 20, 10, 30)),
                  node("android.widget.TextView", "Try again", bounds=(0, 40, 10, 50))])
    assert diff_error_message(before, after) == "Error Try again"


def test_replay_trace(flight_device):
    final = replay_trace(flight_device, [{"field": "depart", "text": "train"}, {"field": "depart", "text": "Paris"}])
    assert final.screen_id == "results"
    assert [action for action, _ in final.history] == ["input depart 'train'", "input depart 'Paris'"]
    again = replay_trace(flight_device, [{"field": "depart", "text": "train"}, {"field": "depart", "text": "Paris"}])
    assert fingerprint(flight_device.current_page(again)) == fingerprint(flight_device.current_page(final))


def test_replay_trace_names_bad_step(flight_device):
    with pytest.raises(UnknownField, match="step 2"):
        replay_trace(flight_device, [{"field": "depart", "text": "train"}, {"field": "arrive", "text": "x"}])


def test_devices_are_independent_per_state():
    device = SimulatedDevice(sim_app_from_dict(FLIGHT_SPEC))
    first, second = device.start(), device.start()
    device.inject_and_submit(first, "depart", "Paris")
    assert second.screen_id == "search"
