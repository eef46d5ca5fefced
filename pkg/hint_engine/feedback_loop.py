"""
Per-input pipeline: prompt, ask the LLM, validate the co-generated input
content on a device, feed failures back, and grow the example store on success.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from .device_sim import DeviceAdapter, DeviceSession
from .entity_extract import GuiEntityBundle, extract_bundle
from .errors import UnknownScreen
from .example_store import (
    EmbeddingTable,
    ExampleRecord,
    ExampleStore,
    Origin,
    RetrievalConfig,
    content_id,
    select_examples,
)
from .llm_gateway import HintResult, LlmGateway
from .prompt_forge import feedback_document, generation_document, render
from .vh_parser import AppManifest, NodePath, ViewHierarchy, find_text_inputs, has_hint

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROUNDS = 3


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL_NO_TRANSITION = "FailNoTransition"
    UNVALIDATED = "Unvalidated"


@dataclass(frozen=True)
class FeedbackRecord:
    verdict: Verdict
    failed_input: str
    error_message: str | None = None
    round: int = 1

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("round starts at 1")
        if self.error_message is not None and self.verdict is not Verdict.FAIL_NO_TRANSITION:
            raise ValueError("Only a failed round can carry an error message")


@dataclass(frozen=True)
class TranscriptEntry:
    prompt: str
    raw_response: str
    feedback: FeedbackRecord


@dataclass
class HintOutcome:
    bundle: GuiEntityBundle
    result: HintResult
    verdict: FeedbackRecord
    rounds_used: int
    transcript: list[TranscriptEntry]
    backend_calls: int = 0
    runtime_record: ExampleRecord | None = None


@dataclass(frozen=True)
class GenerationOptions:
    max_rounds: int = DEFAULT_MAX_ROUNDS
    use_icl: bool = True
    use_feedback: bool = True

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be at least 1, got {self.max_rounds}")


@dataclass
class Collaborators:
    store: ExampleStore
    table: EmbeddingTable
    gateway: LlmGateway
    device: DeviceAdapter | None = None
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    options: GenerationOptions = field(default_factory=GenerationOptions)


@dataclass(frozen=True)
class HintPatch:
    source_path: str
    node_path: NodePath
    hint_text: str
    input_content: str
    verdict: Verdict
    rounds_used: int
    outcome: HintOutcome | None = field(default=None, compare=False, repr=False)

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.FAIL_NO_TRANSITION

    def to_dict(self) -> dict:
        return {
            "source": self.source_path,
            "node_path": list(self.node_path),
            "hint_text": self.hint_text,
            "input_content": self.input_content,
            "verdict": self.verdict.value,
            "rounds_used": self.rounds_used,
        }


def _runtime_record(bundle: GuiEntityBundle, hint_text: str) -> ExampleRecord:
    input_info = bundle.input
    return ExampleRecord(
        record_id=content_id(input_info.input_label, input_info.nearby_labels, hint_text, "runtime"),
        input_label=input_info.input_label,
        nearby_labels=input_info.nearby_labels,
        activity_name=bundle.page.activity_name,
        app_name=bundle.app.app_name,
        hint_text=hint_text,
        origin=Origin.RUNTIME,
    )


def _validate(session: DeviceSession, field_id: str, content: str, round_number: int) -> FeedbackRecord:
    before = session.page()
    session.submit(field_id, content)
    after = session.page()
    if session.device.detect_transition(before, after):
        return FeedbackRecord(Verdict.PASS, content, None, round_number)
    error = session.device.diff_error_message(before, after)
    return FeedbackRecord(Verdict.FAIL_NO_TRANSITION, content, error, round_number)


def generate_hint(bundle: GuiEntityBundle, store: ExampleStore, table: EmbeddingTable, gateway: LlmGateway,
                  session: DeviceSession | None, field_id: str = "",
                  opts: GenerationOptions = GenerationOptions(),
                  retrieval: RetrievalConfig = RetrievalConfig()) -> HintOutcome:
    """
    Generates and validates a hint-text for one input.

    Round 1 prompts with in-context examples (when enabled) plus the GUI sections.
    Each round's input content is typed into `field_id` on the session's device;
    a page transition is a Pass. A failed round is fed back (feedback enabled)
    until `max_rounds` is reached. Examples selected in round 1 are not
    re-selected for feedback rounds. Without a session the single round is
    returned as Unvalidated.

    Passing hints are added to `store` as runtime examples.

    Raises:
        BackendError: When the backend fails after its retries.
        UnparseableAfterReminder: When an answer stays unreadable after the one reminder.
    """
    examples = select_examples(bundle, store, table, retrieval) if opts.use_icl else []
    prompt = render(generation_document(bundle, examples))

    transcript: list[TranscriptEntry] = []
    reminder_left = True
    calls = 0
    round_number = 0
    while True:
        round_number += 1
        reply = gateway.query_hint(prompt, allow_reminder=reminder_left)
        calls += reply.calls
        if reply.calls > 1:
            reminder_left = False
        result = reply.result

        if session is None:
            verdict = FeedbackRecord(Verdict.UNVALIDATED, result.input_content, None, round_number)
        else:
            verdict = _validate(session, field_id, result.input_content, round_number)
        transcript.append(TranscriptEntry(prompt, reply.raw_responses[-1], verdict))
        logger.debug("%s round %d: %r -> %s", bundle.input.input_label, round_number,
                     result.input_content, verdict.verdict.value)

        if verdict.verdict is not Verdict.FAIL_NO_TRANSITION:
            break
        if not opts.use_feedback or round_number >= opts.max_rounds:
            break
        prompt = render(feedback_document(bundle, verdict))

    record = None
    if verdict.verdict is Verdict.PASS:
        record = _runtime_record(bundle, result.hint_text)
        if not store.add_example(record):
            record = None
    return HintOutcome(bundle=bundle, result=result, verdict=verdict, rounds_used=round_number,
                       transcript=transcript, backend_calls=calls, runtime_record=record)


def _session_for(device: DeviceAdapter | None, vh: ViewHierarchy) -> DeviceSession | None:
    if device is None:
        return None
    try:
        return DeviceSession(device, device.start(vh.activity_name))
    except UnknownScreen as e:
        logger.warning("%s; %s will not be validated", e, vh.source_path or vh.activity_name)
        return None


def repair_page(vh: ViewHierarchy, manifest: AppManifest | None, collaborators: Collaborators,
                log_callback=None) -> list[HintPatch]:
    """
    Produces one patch per text input lacking a hint. Inputs with hints are skipped.
    Patches for inputs that never passed are still emitted, flagged by their verdict.
    Each input is validated from a fresh device state on the page's activity.
    Inputs the device screen does not define come back Unvalidated.
    """
    patches: list[HintPatch] = []
    for ref in find_text_inputs(vh):
        if has_hint(ref.node):
            continue
        entity = extract_bundle(vh, manifest, ref.path)
        session = _session_for(collaborators.device, vh)
        field_id = collaborators.device.field_for(vh, ref.path) if session else ""
        if session is not None and not session.device.has_field(session.state, field_id):
            logger.warning("%s %s: device screen has no field %r; input will not be validated",
                           vh.source_path or vh.activity_name, list(ref.path), field_id)
            session, field_id = None, ""
        outcome = generate_hint(entity, collaborators.store, collaborators.table, collaborators.gateway,
                                session, field_id, collaborators.options, collaborators.retrieval)
        patches.append(HintPatch(
            source_path=vh.source_path,
            node_path=ref.path,
            hint_text=outcome.result.hint_text,
            input_content=outcome.result.input_content,
            verdict=outcome.verdict.verdict,
            rounds_used=outcome.rounds_used,
            outcome=outcome,
        ))
        if log_callback:
            log_callback(f"{vh.source_path or vh.activity_name} {list(ref.path)}: "
                         f"{outcome.verdict.verdict.value} in {outcome.rounds_used} round(s)")
    return patches


def repair_corpus(pages: list[tuple[ViewHierarchy, AppManifest | None, DeviceAdapter | None]],
                  collaborators: Collaborators, jobs: int = 1, log_callback=None) -> list[HintPatch]:
    """
    Runs `repair_page` over every (page, manifest, device) triple.

    Pages run in parallel against snapshots of the store taken before the run;
    runtime examples are committed back to `collaborators.store` in page order,
    so the patches and the grown store do not depend on `jobs`.
    """
    base_store = collaborators.store

    def _repair(item) -> list[HintPatch]:
        vh, manifest, device = item
        local = replace(collaborators, store=base_store.snapshot(), device=device)
        return repair_page(vh, manifest, local, log_callback)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(_repair, pages))

    patches = [patch for page_patches in results for patch in page_patches]
    added = sum(
        1 for patch in patches
        if patch.outcome is not None and patch.outcome.runtime_record is not None
        and base_store.add_example(patch.outcome.runtime_record)
    )
    logger.info("%d patch(es) over %d page(s); %d runtime example(s) added", len(patches), len(pages), added)
    return patches
