import json
import os

import pandas as pd
import pytest

from hint_engine.data_loader import read_jsonl
from hint_engine.reporting import load_report
from tests.builders import answer, node, page, write_flight_corpus, write_page, write_yaml
from tools.core import EXIT_BACKEND, EXIT_OK, EXIT_USAGE, main

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


class Cli:
    """Runs `main` with a scripted-mock config written next to the test data."""

    def __init__(self, root):
        self.root = root
        self.output = os.path.join(root, "out")
        self.lines = []
        self.config = write_yaml(os.path.join(root, "config.yaml"), {
            "paths": {"output": self.output},
            "backend": {"kind": "scripted_mock"},
            "runtime": {"jobs": 1},
        })

    def __call__(self, command, *args):
        self.lines.clear()
        return main([command, "--config", self.config, *map(str, args)], log_callback=self.lines.append)

    @property
    def text(self) -> str:
        return "\n".join(str(line) for line in self.lines)

    def out(self, name) -> str:
        return os.path.join(self.output, name)


@pytest.fixture
def cli(tmp_path):
    return Cli(str(tmp_path))


def generate(cli, corpus, embeddings, *extra, output=None):
    return cli("generate", "--corpus", corpus["corpus"], "--store", corpus["store"], "--embeddings", embeddings,
               "--sims", corpus["sims"], "--mock-script", corpus["mock_script"],
               "--output", output or cli.output, *extra)


# --- audit ---

def test_audit_writes_text_report(cli, form_corpus):
    assert cli("audit", "--corpus", form_corpus["corpus"]) == EXIT_OK
    with open(cli.out("audit_report.txt"), encoding="utf-8") as f:
        text = f.read()
    assert "Apps with text inputs:      2" in text
    assert "100.0%" in text


def test_audit_structured_report_loads(cli, form_corpus):
    assert cli("audit", "--corpus", form_corpus["corpus"], "--format", "structured") == EXIT_OK
    with open(cli.out("audit_report.json"), encoding="utf-8") as f:
        report = load_report(f.read())
    assert report.apps_with_inputs == 2
    assert report.inputs_missing == 20


def test_audit_bad_path(cli, tmp_path):
    assert cli("audit", "--corpus", tmp_path / "nowhere") == EXIT_USAGE
    assert "Error" in cli.text


# --- mine ---

def test_mine_is_idempotent(cli, tmp_path):
    write_page(os.path.join(tmp_path, "corpus", "shop", "LoginActivity.xml"), page([
        node("android.widget.TextView", "Sign in", bounds=(40, 100, 1040, 220)),
        node("android.widget.EditText", rid="shop:id/email", hint="Email address", bounds=(40, 300, 1040, 420)),
        node("android.widget.EditText", rid="shop:id/password", hint="Password", bounds=(40, 440, 1040, 560)),
    ]))
    store = os.path.join(tmp_path, "store", "examples.jsonl")
    assert cli("mine", "--corpus", tmp_path / "corpus", "--store", store) == EXIT_OK
    with open(store, encoding="utf-8") as f:
        first = f.read()
    assert [record["hint_text"] for record in read_jsonl(store)] == ["Email address", "Password"]

    assert cli("mine", "--corpus", tmp_path / "corpus", "--store", store) == EXIT_OK
    with open(store, encoding="utf-8") as f:
        assert f.read() == first
    assert "(0 new)" in cli.text


def test_mine_empty_corpus(cli, tmp_path):
    os.makedirs(tmp_path / "empty")
    store = os.path.join(tmp_path, "store.jsonl")
    assert cli("mine", "--corpus", tmp_path / "empty", "--store", store) == EXIT_OK
    assert os.path.getsize(store) == 0


# --- generate / evaluate ---

def test_generate_then_evaluate(cli, form_corpus, embeddings_path):
    assert generate(cli, form_corpus, embeddings_path, "--jobs", 2) == EXIT_OK
    patches = read_jsonl(cli.out("patches.jsonl"))
    assert len(patches) == 20
    assert {patch["verdict"] for patch in patches} == {"Pass"}
    assert len(read_jsonl(cli.out("runtime_store.jsonl"))) == 10
    assert os.path.getsize(form_corpus["store"]) == 0

    assert cli("evaluate", "--candidates", cli.out("patches.jsonl"),
               "--references", form_corpus["references"]) == EXIT_OK
    with open(cli.out("metrics.json"), encoding="utf-8") as f:
        means = json.load(f)["means"]
    assert means["exact_match"] == pytest.approx(1.0)
    assert means["bleu1"] == pytest.approx(1.0)
    assert os.path.isfile(cli.out("metrics.csv"))


def test_generate_is_byte_identical_across_runs(cli, form_corpus, embeddings_path, tmp_path):
    outputs = [str(tmp_path / "run1"), str(tmp_path / "run2")]
    for output, jobs in zip(outputs, (1, 4)):
        assert generate(cli, form_corpus, embeddings_path, "--jobs", jobs, output=output) == EXIT_OK
    for name in ("patches.jsonl", "transcript.jsonl", "runtime_store.jsonl"):
        with open(os.path.join(outputs[0], name), "rb") as a, open(os.path.join(outputs[1], name), "rb") as b:
            assert a.read() == b.read(), name


def test_feedback_flag(cli, failing_first_corpus, embeddings_path):
    assert generate(cli, failing_first_corpus, embeddings_path, "--no-feedback") == EXIT_OK
    (patch,) = read_jsonl(cli.out("patches.jsonl"))
    assert patch["verdict"] == "FailNoTransition"
    assert patch["rounds_used"] == 1

    assert generate(cli, failing_first_corpus, embeddings_path) == EXIT_OK
    (patch,) = read_jsonl(cli.out("patches.jsonl"))
    assert patch["verdict"] == "Pass"
    assert patch["rounds_used"] == 2
    assert patch["hint_text"] == "Please enter a departure city"
    rounds = read_jsonl(cli.out("transcript.jsonl"))
    assert [row["verdict"] for row in rounds] == ["FailNoTransition", "Pass"]
    assert rounds[0]["error_message"] == "Please enter the correct city name"


def test_dry_run_leaves_inputs_unvalidated(cli, failing_first_corpus, embeddings_path):
    assert generate(cli, failing_first_corpus, embeddings_path, "--dry-run") == EXIT_OK
    (patch,) = read_jsonl(cli.out("patches.jsonl"))
    assert patch["verdict"] == "Unvalidated"


def test_generate_missing_embeddings(cli, form_corpus, tmp_path):
    assert generate(cli, form_corpus, tmp_path / "missing.txt") == EXIT_USAGE
    assert "Embedding table not found" in cli.text


def test_generate_mock_miss_is_backend_error(cli, tmp_path, embeddings_path):
    corpus = write_flight_corpus(tmp_path / "flight", {"rules": []})
    assert generate(cli, corpus, embeddings_path) == EXIT_BACKEND
    assert "Backend error" in cli.text


def test_evaluate_length_mismatch(cli, tmp_path):
    candidates = os.path.join(tmp_path, "c.jsonl")
    with open(candidates, "w", encoding="utf-8") as f:
        f.write(json.dumps({"hint_text": "Enter city"}) + "\n")
    references = os.path.join(tmp_path, "r.jsonl")
    with open(references, "w", encoding="utf-8") as f:
        f.write(json.dumps({"hint_text": "Enter city"}) + "\n" + json.dumps({"hint_text": "Name"}) + "\n")
    assert cli("evaluate", "--candidates", candidates, "--references", references) == EXIT_USAGE


def test_usage_errors():
    assert main(["bogus"], log_callback=lambda _: None) == EXIT_USAGE
    assert main(["audit", "--config", "/nonexistent/config.yaml"], log_callback=lambda _: None) == EXIT_USAGE


def test_negative_k_is_rejected(cli, form_corpus, embeddings_path):
    assert generate(cli, form_corpus, embeddings_path, "--k", -1) == EXIT_USAGE


# --- simulate ---

def test_simulate_trace(cli):
    sims = os.path.join(DATA_DIR, "sims", "flight.yaml")
    assert cli("simulate", "--sims", sims, "--trace", os.path.join(DATA_DIR, "trace.yaml")) == EXIT_OK
    assert "final screen: results" in cli.text
    assert "final fingerprint: " in cli.text


def test_simulate_unknown_field_names_step(cli, tmp_path):
    trace = write_yaml(tmp_path / "trace.yaml", [{"field": "depart", "text": "Paris"}, {"field": "nope", "text": "x"}])
    sims = os.path.join(DATA_DIR, "sims", "flight.yaml")
    assert cli("simulate", "--sims", sims, "--trace", trace) == EXIT_USAGE
    assert "step 2" in cli.text


# --- ablate ---

def test_ablate_writes_table(cli, form_corpus, embeddings_path):
    assert cli("ablate", "--corpus", form_corpus["corpus"], "--store", form_corpus["store"],
               "--embeddings", embeddings_path, "--sims", form_corpus["sims"],
               "--mock-script", form_corpus["mock_script"], "--references", form_corpus["references"],
               "--variants", "full", "no_feedback") == EXIT_OK
    frame = pd.read_csv(cli.out("ablation.csv"))
    assert list(frame["variant"]) == ["full", "no_feedback"]
    assert (frame["pass_rate"] == 1.0).all()
    assert (frame["exact_match"] == 1.0).all()


def test_ablate_unknown_variant(cli, form_corpus, embeddings_path):
    assert cli("ablate", "--corpus", form_corpus["corpus"], "--store", form_corpus["store"],
               "--embeddings", embeddings_path, "--sims", form_corpus["sims"],
               "--mock-script", form_corpus["mock_script"], "--variants", "full", "k9") == EXIT_USAGE
    assert "Unknown variants ['k9']" in cli.text


def test_generate_keeps_going_past_inputs_the_sim_lacks(cli, tmp_path, embeddings_path):
    corpus = write_flight_corpus(tmp_path / "flight", {"default": answer("Enter departure city", "Beijing")})
    write_page(os.path.join(corpus["corpus"], "flight", "SearchFlight.xml"), page([
        node("android.widget.TextView", "Flight Search", bounds=(40, 100, 1040, 220)),
        node("android.widget.EditText", "Depart", rid="com.example.flight:id/depart", bounds=(40, 240, 1040, 360)),
        node("android.widget.EditText", "Notes", bounds=(40, 380, 1040, 500)),
    ]))
    assert generate(cli, corpus, embeddings_path) == EXIT_OK
    verdicts = [patch["verdict"] for patch in read_jsonl(cli.out("patches.jsonl"))]
    assert verdicts == ["Pass", "Unvalidated"]
    assert len(read_jsonl(cli.out("runtime_store.jsonl"))) == 1


def test_generate_needs_a_mined_store(cli, tmp_path, embeddings_path):
    corpus = write_flight_corpus(tmp_path / "flight", {"default": answer("Enter departure city", "Beijing")})
    os.remove(corpus["store"])
    assert generate(cli, corpus, embeddings_path) == EXIT_USAGE
    assert "Example store not found" in cli.text
    assert "run `mine`" in cli.text

    assert generate(cli, corpus, embeddings_path, "--k", 0) == EXIT_OK

    assert cli("mine", "--corpus", corpus["corpus"], "--store", corpus["store"]) == EXIT_OK
    assert generate(cli, corpus, embeddings_path) == EXIT_OK
    (patch,) = read_jsonl(cli.out("patches.jsonl"))
    assert patch["verdict"] == "Pass"
