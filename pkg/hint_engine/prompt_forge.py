"""
Prompt construction.

All English wording lives in TEMPLATES; tests pin the rendered output with
golden files, so any edit there is a deliberate format change.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

from .entity_extract import GuiEntityBundle
from .example_store import ExampleRecord

if TYPE_CHECKING:
    from .feedback_loop import FeedbackRecord

UNKNOWN = "unknown"
NULL = "null"

TEMPLATES = {
    "icl_header": "We will provide you with {count} examples:",
    "icl_line": '{ordinal} text input is "{input}", its nearby components are "{nearby}", '
                'its hint-text is "{hint}".',
    "app_info": 'The app name is "{app_name}", it has following activities: "{activities}".',
    "page_info": 'The current GUI page is "{activity}", it has following components: "{components}", '
                 'the upper part of the page is "{upper}", the lower part of the page is "{lower}".',
    "input_info": 'The text input of this page is "{input}", its nearby components are "{nearby}".',
    "feedback": "The input content \"{content}\" doesn't pass the page, "
                "the error message of the input component is: {error}.",
    "query": "Please generate a hint-text for the input component based on the above information, "
             "and generate corresponding input content based on the generated hint-text.",
    "feedback_query": "Please regenerate the hint text and its corresponding input content "
                      "based on the feedback information above.",
    "example_output": 'Please output according to the following example: '
                      'the hint-text is "xxx", the input content is "xxx".',
    "format_reminder": 'Your previous answer could not be read. Answer only in this format: '
                       'the hint-text is "xxx", the input content is "xxx".',
}


class SectionKind(str, Enum):
    IN_CONTEXT = "InContext"
    APP_INFO = "AppInfo"
    PAGE_INFO = "PageInfo"
    INPUT_INFO = "InputInfo"
    FEEDBACK = "Feedback"
    QUERY = "Query"
    FEEDBACK_QUERY = "FeedbackQuery"
    EXAMPLE_OUTPUT = "ExampleOutput"


class QueryMode(str, Enum):
    GENERATE = "Generate"
    REFINE = "Refine"


@dataclass(frozen=True)
class Section:
    kind: SectionKind
    text: str


@dataclass(frozen=True)
class PromptDocument:
    sections: tuple[Section, ...]

    @property
    def kinds(self) -> list[SectionKind]:
        return [section.kind for section in self.sections]


GENERATION_ORDER = [SectionKind.IN_CONTEXT, SectionKind.APP_INFO, SectionKind.PAGE_INFO,
                    SectionKind.INPUT_INFO, SectionKind.QUERY, SectionKind.EXAMPLE_OUTPUT]
FEEDBACK_ORDER = [SectionKind.FEEDBACK, SectionKind.APP_INFO, SectionKind.PAGE_INFO,
                  SectionKind.INPUT_INFO, SectionKind.FEEDBACK_QUERY, SectionKind.EXAMPLE_OUTPUT]


def ordinal(n: int) -> str:
    if 10 <= n % 100 <= 20:
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def _join(labels: Iterable[str]) -> str:
    return ", ".join(labels) or UNKNOWN


def build_gui_sections(bundle: GuiEntityBundle) -> list[Section]:
    app, page, input_info = bundle.app, bundle.page, bundle.input
    return [
        Section(SectionKind.APP_INFO, TEMPLATES["app_info"].format(
            app_name=app.app_name or UNKNOWN, activities=_join(app.activities))),
        Section(SectionKind.PAGE_INFO, TEMPLATES["page_info"].format(
            activity=page.activity_name or UNKNOWN, components=_join(page.components),
            upper=_join(page.upper), lower=_join(page.lower))),
        Section(SectionKind.INPUT_INFO, TEMPLATES["input_info"].format(
            input=input_info.input_label or UNKNOWN, nearby=_join(input_info.nearby_labels))),
    ]


def build_icl_section(examples: Sequence[ExampleRecord]) -> Section | None:
    """Numbered example lines under a count header; None when there are no examples."""
    if not examples:
        return None
    lines = [TEMPLATES["icl_header"].format(count=len(examples))]
    for number, example in enumerate(examples, start=1):
        lines.append(TEMPLATES["icl_line"].format(
            ordinal=ordinal(number), input=example.input_label or UNKNOWN,
            nearby=_join(example.nearby_labels), hint=example.hint_text))
    return Section(SectionKind.IN_CONTEXT, "\n".join(lines))


def build_query_sections(mode: QueryMode) -> list[Section]:
    if QueryMode(mode) is QueryMode.GENERATE:
        query = Section(SectionKind.QUERY, TEMPLATES["query"])
    else:
        query = Section(SectionKind.FEEDBACK_QUERY, TEMPLATES["feedback_query"])
    return [query, Section(SectionKind.EXAMPLE_OUTPUT, TEMPLATES["example_output"])]


def build_feedback_section(fb: "FeedbackRecord") -> Section:
    error = f'"{fb.error_message}"' if fb.error_message else NULL
    return Section(SectionKind.FEEDBACK, TEMPLATES["feedback"].format(content=fb.failed_input, error=error))


def generation_document(bundle: GuiEntityBundle, examples: Sequence[ExampleRecord] = ()) -> PromptDocument:
    sections = []
    icl = build_icl_section(examples)
    if icl is not None:
        sections.append(icl)
    sections += build_gui_sections(bundle)
    sections += build_query_sections(QueryMode.GENERATE)
    return PromptDocument(tuple(sections))


def feedback_document(bundle: GuiEntityBundle, fb: "FeedbackRecord") -> PromptDocument:
    sections = [build_feedback_section(fb)]
    sections += build_gui_sections(bundle)
    sections += build_query_sections(QueryMode.REFINE)
    return PromptDocument(tuple(sections))


def render(doc: PromptDocument) -> str:
    """Sections separated by one blank line, newline-terminated."""
    return "\n\n".join(section.text for section in doc.sections) + "\n"


def with_format_reminder(prompt: str) -> str:
    return prompt + "\n" + TEMPLATES["format_reminder"] + "\n"
