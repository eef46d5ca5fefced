"""
Command-line workflows: audit, mine, generate, evaluate, simulate and ablate.

Settings come from `config.yaml` (sections paths, backend, generation, retrieval,
runtime) with command-line flags taking precedence. Every command returns an exit
code: 0 success, 2 usage or IO error, 3 backend error.
"""
import argparse
import logging
import os
from dataclasses import dataclass, field

import yaml
from dotenv import load_dotenv

from hint_engine.audit import scan_corpus
from hint_engine.data_loader import (
    load_category_map,
    load_corpus,
    pair_hint_records,
    read_jsonl,
    write_jsonl,
)
from hint_engine.device_sim import SimulatedDevice, load_sim_app_file, replay_trace
from hint_engine.errors import BackendError, HintEngineError, UnparseableResponse
from hint_engine.example_store import (
    DEFAULT_DIMENSION,
    DEFAULT_K,
    ExampleStore,
    RetrievalConfig,
    load_embedding_table,
    load_store,
    mine_examples,
    save_store,
)
from hint_engine.feedback_loop import Collaborators, GenerationOptions, repair_corpus
from hint_engine.llm_gateway import BackendConfig, LlmGateway
from hint_engine.metrics import evaluate_corpus
from hint_engine.reporting import render_metric_report, render_report, write_metric_report, write_text
from hint_engine.vh_parser import fingerprint

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_BACKEND = 0, 2, 3
DEFAULT_CONFIG_PATH = "config.yaml"
COMMANDS = ("audit", "mine", "generate", "evaluate", "simulate", "ablate")
SIM_SUFFIXES = (".yaml", ".yml")


class UsageError(HintEngineError):
    """A required path or setting is missing."""


@dataclass
class RunConfig:
    command: str
    corpus: str = "data/corpus"
    store: str = "data/store.jsonl"
    embeddings: str = "data/embeddings.txt"
    sims: str = "data/sims"
    output: str = "results"
    categories: str | None = None
    trace: str | None = None
    candidates: str | None = None
    references: str | None = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    use_icl: bool = True
    use_feedback: bool = True
    k: int = DEFAULT_K
    max_rounds: int = 3
    dimension: int = DEFAULT_DIMENSION
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    dry_run: bool = False
    report_format: str = "text"
    variants: list[str] | None = None
    verbose: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command '{self.command}', expected one of {COMMANDS}")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.k == 0:
            self.use_icl = False
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        if self.report_format not in ("text", "structured"):
            raise ValueError(f"format must be 'text' or 'structured', got {self.report_format!r}")

    @property
    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(k=max(1, self.k))

    @property
    def options(self) -> GenerationOptions:
        return GenerationOptions(max_rounds=self.max_rounds, use_icl=self.use_icl, use_feedback=self.use_feedback)


def load_config_file(path: str, required: bool = False) -> dict:
    if not os.path.isfile(path):
        if required:
            raise UsageError(f"Configuration file not found at {path}")
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def build_run_config(config: dict, overrides: dict) -> RunConfig:
    """Merges config-file sections with flag overrides (None means "not given")."""
    settings = {}
    for section in ("paths", "generation", "retrieval", "runtime"):
        settings.update(config.get(section) or {})
    if "format" in settings:
        settings["report_format"] = settings.pop("format")
    backend = dict(config.get("backend") or {})

    for key in ("mock_script", "kind"):
        value = overrides.pop(key, None)
        if value is not None:
            backend[key] = value
    settings.update({key: value for key, value in overrides.items() if value is not None})

    known = set(RunConfig.__dataclass_fields__) - {"backend"}
    unknown = set(settings) - known
    if unknown:
        raise ValueError(f"Unknown settings: {sorted(unknown)}")
    return RunConfig(backend=BackendConfig.from_dict(backend), **settings)


def _require_file(path: str | None, what: str) -> str:
    if not path or not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _require_dir(path: str | None, what: str) -> str:
    if not path or not os.path.isdir(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def load_devices(sims_path: str) -> dict[str | None, SimulatedDevice]:
    """
    A directory maps `<app-id>.yaml` specs to app ids; a single file is used for
    every app (key None).
    """
    if os.path.isfile(sims_path):
        return {None: SimulatedDevice(load_sim_app_file(sims_path))}
    devices = {}
    for name in sorted(os.listdir(_require_dir(sims_path, "Sim spec path"))):
        stem, suffix = os.path.splitext(name)
        if suffix in SIM_SUFFIXES:
            devices[stem] = SimulatedDevice(load_sim_app_file(os.path.join(sims_path, name)))
    return devices


def corpus_pages(corpus, devices: dict | None, log_callback=print) -> list:
    """(page, manifest, device) triples in corpus order; device is None without a matching sim."""
    pages = []
    for app in corpus:
        device = None
        if devices is not None:
            device = devices.get(app.app_id, devices.get(None))
            if device is None:
                log_callback(f"Warning: no sim spec for app '{app.app_id}'; its inputs stay Unvalidated.")
        pages += [(page, app.manifest, device) for page in app.pages]
    return pages


def _load_store_for(cfg: RunConfig) -> ExampleStore:
    if not cfg.use_icl and not os.path.isfile(cfg.store or ""):
        return ExampleStore()
    if not cfg.store or not os.path.isfile(cfg.store):
        raise UsageError(f"Example store not found: {cfg.store}; run `mine` on a hinted corpus first "
                         "or pass --k 0 to generate without examples")
    return load_store(cfg.store)


def _transcript_rows(patches) -> list[dict]:
    rows = []
    for patch in patches:
        for number, entry in enumerate(patch.outcome.transcript, start=1):
            rows.append({
                "source": patch.source_path,
                "node_path": list(patch.node_path),
                "round": number,
                "prompt": entry.prompt,
                "raw_response": entry.raw_response,
                "input_content": entry.feedback.failed_input,
                "verdict": entry.feedback.verdict.value,
                "error_message": entry.feedback.error_message,
            })
    return rows


# --- Commands ---

def cmd_audit(cfg: RunConfig, log_callback=print) -> int:
    category_map = load_category_map(_require_file(cfg.categories, "Category map")) if cfg.categories else {}
    report = scan_corpus(_require_dir(cfg.corpus, "Corpus"), category_map, jobs=cfg.jobs)
    suffix = "json" if cfg.report_format == "structured" else "txt"
    text = render_report(report, cfg.report_format)
    write_text(os.path.join(cfg.output, f"audit_report.{suffix}"), text, log_callback)
    if cfg.report_format == "text":
        log_callback(text)
    return EXIT_OK


def cmd_mine(cfg: RunConfig, log_callback=print) -> int:
    corpus = load_corpus(_require_dir(cfg.corpus, "Corpus"))
    store = load_store(cfg.store) if os.path.isfile(cfg.store) else ExampleStore()
    before = len(store)
    mined = mine_examples((page, app.manifest) for app in corpus for page in app.pages)
    for record in mined:
        store.add_example(record)
    directory = os.path.dirname(cfg.store)
    if directory:
        os.makedirs(directory, exist_ok=True)
    save_store(store, cfg.store)
    log_callback(f"Mined {len(mined)} hinted input(s); store {cfg.store} now holds {len(store)} "
                 f"example(s) ({len(store) - before} new).")
    return EXIT_OK


def cmd_generate(cfg: RunConfig, log_callback=print) -> int:
    corpus = load_corpus(_require_dir(cfg.corpus, "Corpus"))
    table = load_embedding_table(_require_file(cfg.embeddings, "Embedding table"), cfg.dimension)
    store = _load_store_for(cfg)
    devices = None if cfg.dry_run else load_devices(cfg.sims)

    gateway = LlmGateway(cfg.backend)
    try:
        collaborators = Collaborators(store=store, table=table, gateway=gateway,
                                      retrieval=cfg.retrieval, options=cfg.options)
        log_callback(f"\n{'=' * 20} Generating hint-text ({'dry run' if cfg.dry_run else 'validated'}) {'=' * 20}")
        patches = repair_corpus(corpus_pages(corpus, devices, log_callback), collaborators,
                                jobs=cfg.jobs, log_callback=log_callback)
    finally:
        gateway.close()

    write_jsonl(os.path.join(cfg.output, "patches.jsonl"), [patch.to_dict() for patch in patches])
    write_jsonl(os.path.join(cfg.output, "transcript.jsonl"), _transcript_rows(patches))
    save_store(store, os.path.join(cfg.output, "runtime_store.jsonl"))

    verdicts = {}
    for patch in patches:
        verdicts[patch.verdict.value] = verdicts.get(patch.verdict.value, 0) + 1
    summary = ", ".join(f"{name}: {count}" for name, count in sorted(verdicts.items())) or "no inputs lacked hints"
    log_callback(f"{len(patches)} patch(es) written to {cfg.output} ({summary})")
    return EXIT_OK


def _hint_of(record: dict) -> str:
    return str(record.get("hint_text", record.get("text", "")))


def cmd_evaluate(cfg: RunConfig, log_callback=print) -> int:
    candidates = read_jsonl(_require_file(cfg.candidates, "Candidates file"))
    references = read_jsonl(_require_file(cfg.references, "References file"))
    pairs = pair_hint_records(candidates, references)
    categories = None
    if pairs and all("category" in reference for _, reference in pairs):
        categories = [str(reference["category"]) for _, reference in pairs]
    report = evaluate_corpus([(_hint_of(c), _hint_of(r)) for c, r in pairs], categories)
    write_metric_report(report, os.path.join(cfg.output, "metrics.json"), log_callback)
    log_callback(render_metric_report(report))
    return EXIT_OK


def _load_trace(path: str) -> tuple[str | None, list[dict]]:
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or []
    if isinstance(data, dict):
        return data.get("activity"), list(data.get("steps") or [])
    if not isinstance(data, list):
        raise UsageError(f"Trace {path} must be a list of steps or a mapping with 'steps'")
    return None, data


def cmd_simulate(cfg: RunConfig, log_callback=print) -> int:
    device = SimulatedDevice(load_sim_app_file(_require_file(cfg.sims, "Sim spec file")))
    activity, steps = _load_trace(_require_file(cfg.trace, "Trace file"))
    state = replay_trace(device, steps, activity)
    for action, digest in state.history:
        log_callback(f"{action} -> {digest[:12]}")
    page = device.current_page(state)
    log_callback(f"final screen: {state.screen_id}")
    log_callback(f"final fingerprint: {fingerprint(page)}")
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, log_callback=print) -> int:
    from tools.ablation import AblationRunner, variants_from_names

    corpus = load_corpus(_require_dir(cfg.corpus, "Corpus"))
    table = load_embedding_table(_require_file(cfg.embeddings, "Embedding table"), cfg.dimension)
    store = _load_store_for(cfg)
    references = read_jsonl(_require_file(cfg.references, "References file")) if cfg.references else None
    pages = corpus_pages(corpus, load_devices(cfg.sims), log_callback)

    runner = AblationRunner(pages, store, table, cfg.backend, references=references,
                            max_rounds=cfg.max_rounds, jobs=cfg.jobs, log_callback=log_callback)
    frame = runner.run(variants_from_names(cfg.variants))
    runner.save_csv(frame, os.path.join(cfg.output, "ablation.csv"))
    log_callback(frame.to_string(index=False))
    return EXIT_OK


COMMAND_HANDLERS = {
    "audit": cmd_audit,
    "mine": cmd_mine,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "ablate": cmd_ablate,
}


def run_command(cfg: RunConfig, log_callback=print) -> int:
    """Runs one command and maps failures onto the exit-code contract."""
    try:
        return COMMAND_HANDLERS[cfg.command](cfg, log_callback)
    except (BackendError, UnparseableResponse) as e:
        log_callback(f"Backend error: {e}")
        return EXIT_BACKEND
    except (HintEngineError, OSError, ValueError, KeyError) as e:
        log_callback(f"Error: {e}")
        return EXIT_USAGE


def run_from_config(config: dict, command: str, overrides: dict | None = None, log_callback=print) -> int:
    """
    Runs a command from a configuration dictionary. Callable from the CLI or tests.
    """
    try:
        cfg = build_run_config(config, dict(overrides or {}, command=command))
    except (HintEngineError, ValueError) as e:
        log_callback(f"Error: {e}")
        return EXIT_USAGE
    return run_command(cfg, log_callback)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help=f"YAML settings file (default {DEFAULT_CONFIG_PATH})")
    common.add_argument("-v", "--verbose", action="store_true", default=None)
    common.add_argument("--corpus")
    common.add_argument("--store")
    common.add_argument("--embeddings")
    common.add_argument("--sims", help="Sim spec file, or a directory of <app-id>.yaml specs")
    common.add_argument("--output", help="Output directory")
    common.add_argument("--jobs", type=int)

    parser = argparse.ArgumentParser(prog="hint-text-gen", description="Hint-text generation for GUI text inputs.")
    commands = parser.add_subparsers(dest="command", required=True)

    audit = commands.add_parser("audit", parents=[common], help="Report missing hint-text statistics")
    audit.add_argument("--categories", help="app_id,category[,downloads] file")
    audit.add_argument("--format", dest="report_format", choices=["text", "structured"])

    commands.add_parser("mine", parents=[common], help="Build or extend the example store")

    generation = argparse.ArgumentParser(add_help=False)
    generation.add_argument("--k", type=int, help="In-context examples per prompt; 0 disables them")
    generation.add_argument("--max-rounds", dest="max_rounds", type=int)
    generation.add_argument("--backend", dest="kind", choices=["http_chat", "scripted_mock", "gemini"])
    generation.add_argument("--mock-script", dest="mock_script")

    generate = commands.add_parser("generate", parents=[common, generation], help="Generate and validate hint-text")
    generate.add_argument("--no-feedback", dest="use_feedback", action="store_false", default=None)
    generate.add_argument("--dry-run", dest="dry_run", action="store_true", default=None,
                          help="Skip device validation; verdicts are Unvalidated")

    evaluate = commands.add_parser("evaluate", parents=[common], help="Score hints against references")
    evaluate.add_argument("--candidates", required=True)
    evaluate.add_argument("--references", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="Replay an action trace on a sim app")
    simulate.add_argument("--trace", required=True)

    ablate = commands.add_parser("ablate", parents=[common, generation], help="Compare pipeline variants")
    ablate.add_argument("--references")
    ablate.add_argument("--variants", nargs="+", help="full, no_icl, no_feedback, k1..k6")
    return parser


def main(argv: list[str] | None = None, log_callback=print) -> int:
    """CLI entry point; returns the exit code."""
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    overrides = vars(args)
    command = overrides.pop("command")
    config_path = overrides.pop("config")
    logging.basicConfig(level=logging.DEBUG if overrides.get("verbose") else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config_file(config_path or DEFAULT_CONFIG_PATH, required=config_path is not None)
    except (UsageError, yaml.YAMLError) as e:
        log_callback(f"Error: {e}")
        return EXIT_USAGE
    return run_from_config(config, command, overrides, log_callback)


if __name__ == "__main__":
    raise SystemExit(main())
