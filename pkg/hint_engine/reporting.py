"""Text and structured renderings of audit and metric reports, plus their file writers."""
import json
import logging
import os

import pandas as pd

from .audit import AppAudit, AuditReport
from .metrics import METRIC_COLUMNS, MetricReport

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("text", "structured")


def _percent(rate: float) -> str:
    return f"{rate * 100:.1f}%"


def _report_dict(report: AuditReport) -> dict:
    return {
        "apps": [vars(app) for app in report.apps],
        "apps_with_inputs": report.apps_with_inputs,
        "apps_with_any_missing": report.apps_with_any_missing,
        "overall_missing_rate": report.overall_missing_rate,
        "category_rates": report.category_rates,
        "screens_with_inputs": report.screens_with_inputs,
        "screens_with_missing": report.screens_with_missing,
        "screen_missing_rate": report.screen_missing_rate,
        "inputs_total": report.inputs_total,
        "inputs_missing": report.inputs_missing,
        "input_missing_rate": report.input_missing_rate,
        "download_rates": report.download_rates,
        "skipped_files": report.skipped_files,
        "warnings": list(report.warnings),
    }


def _render_text(report: AuditReport) -> str:
    lines = [
        "=== Hint-text audit ===",
        f"Apps with text inputs:      {report.apps_with_inputs}",
        f"Apps missing any hint-text: {report.apps_with_any_missing}",
        f"Overall missing rate:       {_percent(report.overall_missing_rate)}",
        f"Screens missing hint-text:  {report.screens_with_missing}/{report.screens_with_inputs} "
        f"({_percent(report.screen_missing_rate)})",
        f"Inputs missing hint-text:   {report.inputs_missing}/{report.inputs_total} "
        f"({_percent(report.input_missing_rate)})",
    ]
    if report.skipped_files:
        lines.append(f"Skipped files:              {report.skipped_files}")

    if report.category_rates:
        lines += ["", "=== By category ==="]
        frame = pd.DataFrame(
            [(category, _percent(rate)) for category, rate in sorted(report.category_rates.items())],
            columns=["category", "missing_rate"],
        )
        lines.append(frame.to_string(index=False))

    if report.download_rates:
        lines += ["", "=== By downloads ==="]
        lines += [f"{bucket}: {_percent(rate)}" for bucket, rate in sorted(report.download_rates.items())]

    if report.warnings:
        lines += ["", "=== Warnings ==="]
        lines += [f"- {warning}" for warning in report.warnings]
    return "\n".join(lines) + "\n"


def render_report(report: AuditReport, fmt: str = "text") -> str:
    """
    Renders an audit report.

    Args:
        report (AuditReport): The report to render.
        fmt (str): "text" for a human-readable table (category rows sorted) or
            "structured" for JSON readable by `load_report`.

    Returns:
        str: The rendered report; identical reports render identically.
    """
    if fmt == "structured":
        return json.dumps(_report_dict(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if fmt == "text":
        return _render_text(report)
    raise ValueError(f"Unknown report format '{fmt}', expected one of {REPORT_FORMATS}")


def load_report(text: str) -> AuditReport:
    """Reads a report written by `render_report(..., "structured")`."""
    data = json.loads(text)
    apps = [AppAudit(**app) for app in data.pop("apps")]
    return AuditReport(apps=apps, **data)


def render_metric_report(report: MetricReport) -> str:
    lines = ["=== Metric means ==="]
    lines += [f"{name:<12}{report.means[name]:.4f}" for name in METRIC_COLUMNS]
    if report.by_category is not None:
        lines += ["", "=== By category ==="]
        lines.append(report.by_category.round(4).to_string())
    return "\n".join(lines) + "\n"


def write_text(path: str, text: str, log_callback=print) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    log_callback(f"Report saved to: {path}")


def write_metric_report(report: MetricReport, output_path: str, log_callback=print) -> None:
    """Writes the structured report to `output_path` and a per-pair CSV next to it."""
    write_text(output_path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", log_callback)
    csv_path = os.path.splitext(output_path)[0] + ".csv"
    report.to_frame().to_csv(csv_path, index=False, float_format="%.6f")
    log_callback(f"Per-pair scores saved to: {csv_path}")
