import logging
import os
from dataclasses import dataclass

import pandas as pd

from hint_engine.data_loader import pair_hint_records
from hint_engine.example_store import DEFAULT_K, EmbeddingTable, ExampleStore, RetrievalConfig
from hint_engine.feedback_loop import Collaborators, GenerationOptions, Verdict, repair_corpus
from hint_engine.llm_gateway import BackendConfig, LlmGateway
from hint_engine.metrics import METRIC_COLUMNS, evaluate_corpus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AblationVariant:
    name: str
    use_icl: bool = True
    use_feedback: bool = True
    k: int = DEFAULT_K


DEFAULT_VARIANTS = [
    AblationVariant("full"),
    AblationVariant("no_icl", use_icl=False),
    AblationVariant("no_feedback", use_feedback=False),
    *(AblationVariant(f"k{k}", k=k) for k in range(1, DEFAULT_K + 1)),
]


def variants_from_names(names: list[str] | None) -> list[AblationVariant]:
    if not names:
        return list(DEFAULT_VARIANTS)
    by_name = {variant.name: variant for variant in DEFAULT_VARIANTS}
    unknown = [name for name in names if name not in by_name]
    if unknown:
        raise ValueError(f"Unknown variants {unknown}; expected some of {sorted(by_name)}")
    return [by_name[name] for name in names]


class AblationRunner:
    """
    Runs the generation pipeline once per variant on the same pages and store.
    Every variant starts from a copy of the store and a fresh backend, so
    variants cannot see each other's runtime examples or scripted-call counters.
    """

    def __init__(self, pages: list, store: ExampleStore, table: EmbeddingTable, backend_cfg: BackendConfig,
                 references: list[dict] | None = None, max_rounds: int = 3, jobs: int = 1, log_callback=print):
        self.pages = pages
        self.store = store
        self.table = table
        self.backend_cfg = backend_cfg
        self.references = references
        self.max_rounds = max_rounds
        self.jobs = jobs
        self.log_callback = log_callback

    def run_variant(self, variant: AblationVariant) -> dict:
        gateway = LlmGateway(self.backend_cfg)
        try:
            collaborators = Collaborators(
                store=self.store.snapshot(), table=self.table, gateway=gateway,
                retrieval=RetrievalConfig(k=variant.k),
                options=GenerationOptions(self.max_rounds, variant.use_icl, variant.use_feedback),
            )
            patches = repair_corpus(self.pages, collaborators, jobs=self.jobs)
        finally:
            gateway.close()

        passed = sum(1 for patch in patches if patch.verdict is Verdict.PASS)
        row = {
            "variant": variant.name,
            "use_icl": variant.use_icl,
            "use_feedback": variant.use_feedback,
            "k": variant.k if variant.use_icl else 0,
            "inputs": len(patches),
            "passed": passed,
            "pass_rate": passed / len(patches) if patches else 0.0,
            "mean_rounds": sum(p.rounds_used for p in patches) / len(patches) if patches else 0.0,
        }
        if self.references is not None and patches:
            pairs = pair_hint_records([patch.to_dict() for patch in patches], self.references)
            report = evaluate_corpus([(c["hint_text"], r["hint_text"]) for c, r in pairs])
            row.update(report.means)
        self.log_callback(f"{variant.name}: {passed}/{len(patches)} passed")
        return row

    def run(self, variants: list[AblationVariant] | None = None) -> pd.DataFrame:
        rows = [self.run_variant(variant) for variant in (variants or DEFAULT_VARIANTS)]
        columns = ["variant", "use_icl", "use_feedback", "k", "inputs", "passed", "pass_rate", "mean_rounds"]
        if self.references is not None:
            columns += METRIC_COLUMNS
        return pd.DataFrame(rows, columns=columns)

    def save_csv(self, frame: pd.DataFrame, filepath: str) -> None:
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        frame.to_csv(filepath, index=False, float_format="%.4f")
        self.log_callback(f"Ablation table saved to: {filepath}")
