import statistics
import time
from dataclasses import replace

import pytest

from backends.scripted_mock_backend import MockScript, ScriptedMockBackend
from hint_engine.data_loader import load_corpus
from hint_engine.device_sim import DeviceSession, SimulatedDevice, sim_app_from_dict
from hint_engine.entity_extract import extract_bundle
from hint_engine.errors import UnparseableAfterReminder
from hint_engine.example_store import ExampleRecord, ExampleStore, RetrievalConfig
from hint_engine.feedback_loop import (
    Collaborators,
    FeedbackRecord,
    GenerationOptions,
    Verdict,
    generate_hint,
    repair_corpus,
    repair_page,
)
from hint_engine.llm_gateway import BackendConfig, LlmGateway
from hint_engine.vh_parser import find_text_inputs
from tests.builders import FAILING_FIRST_SCRIPT, FLIGHT_SPEC, answer, node, page
from tools.core import corpus_pages, load_devices

CITY_EXAMPLE = ExampleRecord("mined-city", "City", ("From",), "SearchTrain", "Train", "Enter departure city")


def gateway_for(script: dict) -> LlmGateway:
    cfg = BackendConfig()
    return LlmGateway(cfg, backend=ScriptedMockBackend(cfg, MockScript.from_dict(script)))


@pytest.fixture
def depart(flight_device):
    vh = flight_device.current_page(flight_device.start())
    (ref,) = find_text_inputs(vh)
    return extract_bundle(vh, None, ref.path)


def session(device):
    return DeviceSession(device, device.start("SearchFlight"))


def test_feedback_record_validation():
    with pytest.raises(ValueError):
        FeedbackRecord(Verdict.FAIL_NO_TRANSITION, "x", round=0)
    with pytest.raises(ValueError):
        FeedbackRecord(Verdict.PASS, "Paris", "error text")
    with pytest.raises(ValueError):
        GenerationOptions(max_rounds=0)


def test_failing_first_passes_in_two_rounds(depart, flight_device, toy_table):
    store = ExampleStore()
    outcome = generate_hint(depart, store, toy_table, gateway_for(FAILING_FIRST_SCRIPT), session(flight_device),
                            "depart")
    assert outcome.verdict.verdict is Verdict.PASS
    assert outcome.rounds_used == 2
    assert outcome.backend_calls == 2
    assert outcome.result.hint_text == "Please enter a departure city"
    first, second = outcome.transcript
    assert first.feedback.verdict is Verdict.FAIL_NO_TRANSITION
    assert first.feedback.error_message == "Please enter the correct city name"
    assert second.prompt.startswith('The input content "train" doesn\'t pass the page')
    assert [r.hint_text for r in store] == ["Please enter a departure city"]
    assert outcome.runtime_record in store.records


def test_without_feedback_the_first_failure_stands(depart, flight_device, toy_table):
    store = ExampleStore()
    outcome = generate_hint(depart, store, toy_table, gateway_for(FAILING_FIRST_SCRIPT), session(flight_device),
                            "depart", GenerationOptions(use_feedback=False))
    assert outcome.verdict.verdict is Verdict.FAIL_NO_TRANSITION
    assert outcome.rounds_used == 1
    assert len(store) == 0
    assert outcome.runtime_record is None


def test_rounds_stop_at_max_rounds(depart, flight_device, toy_table):
    outcome = generate_hint(depart, ExampleStore(), toy_table, gateway_for({"default": answer("Depart", "train")}),
                            session(flight_device), "depart", GenerationOptions(max_rounds=3))
    assert outcome.verdict.verdict is Verdict.FAIL_NO_TRANSITION
    assert outcome.rounds_used == 3
    assert outcome.backend_calls == 3


def test_one_format_reminder_per_input(depart, flight_device, toy_table):
    train = answer("Depart", "train")
    script = {"sequence": ["garbage", train, train, train]}
    outcome = generate_hint(depart, ExampleStore(), toy_table, gateway_for(script), session(flight_device),
                            "depart", GenerationOptions(max_rounds=3))
    assert outcome.backend_calls == 4
    assert outcome.rounds_used == 3

    with pytest.raises(UnparseableAfterReminder):
        generate_hint(depart, ExampleStore(), toy_table, gateway_for({"sequence": ["garbage", train, "garbage"]}),
                      session(flight_device), "depart", GenerationOptions(max_rounds=3))


def test_dry_run_is_unvalidated(depart, toy_table):
    store = ExampleStore()
    outcome = generate_hint(depart, store, toy_table, gateway_for(FAILING_FIRST_SCRIPT), None)
    assert outcome.verdict.verdict is Verdict.UNVALIDATED
    assert outcome.rounds_used == 1
    assert len(store) == 0


def test_in_context_examples_change_the_outcome(depart, flight_device, toy_table):
    script = {"rules": [{"contains": "We will provide you with", "response": answer("Departure city", "Beijing")}],
              "default": answer("Depart", "train")}
    no_feedback = GenerationOptions(use_feedback=False)

    with_icl = generate_hint(depart, ExampleStore([CITY_EXAMPLE]), toy_table, gateway_for(script),
                             session(flight_device), "depart", no_feedback, RetrievalConfig(k=1))
    assert with_icl.verdict.verdict is Verdict.PASS
    assert '1st text input is "City"' in with_icl.transcript[0].prompt

    without = generate_hint(depart, ExampleStore([CITY_EXAMPLE]), toy_table, gateway_for(script),
                            session(flight_device), "depart", GenerationOptions(use_icl=False, use_feedback=False))
    assert without.verdict.verdict is Verdict.FAIL_NO_TRANSITION
    assert "We will provide you with" not in without.transcript[0].prompt


def test_repair_page_skips_hinted_inputs(flight_device, toy_table):
    vh = page([
        node("android.widget.TextView", "Flight Search", bounds=(40, 100, 1040, 220)),
        node("android.widget.EditText", rid="com.example.flight:id/depart", bounds=(40, 240, 1040, 360)),
        node("android.widget.EditText", rid="com.example.flight:id/arrive", hint="Arrival city",
             bounds=(40, 380, 1040, 500)),
    ], activity="SearchFlight", source="flight/SearchFlight.xml")
    collaborators = Collaborators(store=ExampleStore(), table=toy_table, gateway=gateway_for(FAILING_FIRST_SCRIPT),
                                  device=flight_device)
    lines = []
    (patch,) = repair_page(vh, None, collaborators, log_callback=lines.append)
    assert patch.node_path == (0, 1)
    assert patch.verdict is Verdict.PASS and not patch.failed
    assert patch.to_dict() == {
        "source": "flight/SearchFlight.xml",
        "node_path": [0, 1],
        "hint_text": "Please enter a departure city",
        "input_content": "Beijing",
        "verdict": "Pass",
        "rounds_used": 2,
    }
    assert lines == ["flight/SearchFlight.xml [0, 1]: Pass in 2 round(s)"]


def test_repair_page_without_matching_screen_is_unvalidated(toy_table):
    device = SimulatedDevice(sim_app_from_dict(FLIGHT_SPEC))
    vh = page([node("android.widget.EditText", rid="x:id/note", bounds=(0, 0, 10, 10))], activity="NotesActivity")
    collaborators = Collaborators(store=ExampleStore(), table=toy_table,
                                  gateway=gateway_for({"default": answer("Note", "hello")}), device=device)
    (patch,) = repair_page(vh, None, collaborators)
    assert patch.verdict is Verdict.UNVALIDATED


def test_input_missing_from_device_screen_is_unvalidated(flight_device, toy_table):
    vh = page([
        node("android.widget.TextView", "Flight Search", bounds=(40, 100, 1040, 220)),
        node("android.widget.EditText", rid="com.example.flight:id/depart", bounds=(40, 240, 1040, 360)),
        node("android.widget.EditText", "Notes", bounds=(40, 380, 1040, 500)),
    ], activity="SearchFlight", source="flight/SearchFlight.xml")
    collaborators = Collaborators(store=ExampleStore(), table=toy_table,
                                  gateway=gateway_for({"default": answer("Enter departure city", "Beijing")}),
                                  device=flight_device)
    depart, notes = repair_page(vh, None, collaborators)
    assert depart.verdict is Verdict.PASS
    assert notes.node_path == (0, 2)
    assert notes.verdict is Verdict.UNVALIDATED
    assert notes.rounds_used == 1


def test_repair_corpus_is_independent_of_jobs(form_corpus, toy_table):
    pages = corpus_pages(load_corpus(form_corpus["corpus"]), load_devices(form_corpus["sims"]))
    results = []
    for jobs in (1, 4):
        cfg = BackendConfig(mock_script=form_corpus["mock_script"])
        store = ExampleStore([CITY_EXAMPLE])
        patches = repair_corpus(pages, Collaborators(store=store, table=toy_table, gateway=LlmGateway(cfg)), jobs=jobs)
        results.append(([patch.to_dict() for patch in patches], [r.to_dict() for r in store]))
    assert results[0] == results[1]
    patches, records = results[0]
    assert len(patches) == 20
    assert all(patch["verdict"] == "Pass" for patch in patches)
    # one mined example plus the ten distinct runtime hints (the two apps share them)
    assert len(records) == 11


def test_median_page_latency_with_scripted_mock(form_corpus, toy_table):
    pages = corpus_pages(load_corpus(form_corpus["corpus"]), load_devices(form_corpus["sims"]))
    collaborators = Collaborators(store=ExampleStore([CITY_EXAMPLE]), table=toy_table,
                                  gateway=LlmGateway(BackendConfig(mock_script=form_corpus["mock_script"])))
    elapsed = []
    for vh, manifest, device in pages:
        start = time.perf_counter()
        patches = repair_page(vh, manifest, replace(collaborators, device=device))
        elapsed.append(time.perf_counter() - start)
        assert [patch.verdict for patch in patches] == [Verdict.PASS]
    assert statistics.median(elapsed) < 0.05
