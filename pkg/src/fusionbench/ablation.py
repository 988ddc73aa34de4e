"""Three-way modality comparison: text only, image only, multimodal.

All three runs share every hyperparameter and the seed; only the modality
(and therefore the MLP input width) differs, so accuracy differences are
attributable to the inputs rather than initialization luck.  Note the
capacity confound this leaves in place: input width changes the first
layer's parameter count, and no capacity matching is attempted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .feature_store import Dataset, DatasetSplit, MODALITIES
from .metrics import (MetricsReport, baseline_accuracy, max_accuracy,
                      pr_curve_and_ap, smoothed_max_accuracy)
from .trainer import TrainConfig, TrainResult, evaluate, train

CAPACITY_NOTE = (
    "Configurations share every hyperparameter and differ only in input "
    "modality; the first-layer parameter count follows the input width "
    "and is not capacity-matched across rows.")

# Display order for the comparison table on ties: richer inputs first.
_TIE_RANK = {"multimodal": 0, "image": 1, "text": 2}


@dataclass
class AblationOutcome:
    """Reports in configuration order (text, image, multimodal) plus the
    full per-modality training results for artifact writing."""

    reports: list[MetricsReport]
    runs: dict[str, TrainResult]

    def report_for(self, modality: str) -> MetricsReport:
        for report in self.reports:
            if report.config_label == modality:
                return report
        raise ValueError(f"no report for modality {modality!r}")


def run_ablation(ds: Dataset, split: DatasetSplit,
                 base_cfg: TrainConfig) -> AblationOutcome:
    """Train one model per modality and score each on validation.

    AP and the PR curve come from the best-validation-accuracy checkpoint
    of each run; max/smoothed-max come from the full accuracy curve.
    """
    reports = []
    runs: dict[str, TrainResult] = {}
    for modality in MODALITIES:
        cfg = replace(base_cfg, modality=modality)
        result = train(ds, split, cfg)
        _, _, scores = evaluate(result.best_params, ds, split.val_ids,
                                modality, cfg.threshold)
        labels = [ds.get(i).label for i in split.val_ids]
        pr_points, ap = pr_curve_and_ap(scores, labels)
        reports.append(MetricsReport(
            config_label=modality,
            max_accuracy=max_accuracy(result.curves),
            smoothed_max_accuracy=smoothed_max_accuracy(result.curves),
            baseline_accuracy=baseline_accuracy(ds, split.val_ids),
            ap=ap,
            pr_curve=tuple(pr_points),
        ))
        runs[modality] = result
    return AblationOutcome(reports=reports, runs=runs)


def table_order(reports) -> list[MetricsReport]:
    """Rows sorted by Max. Accuracy descending; ties rank multimodal
    before image before text."""
    return sorted(reports,
                  key=lambda r: (-r.max_accuracy, _TIE_RANK[r.config_label]))


def render_markdown(reports) -> str:
    """Markdown comparison table plus baseline and AP lines."""
    rows = table_order(reports)
    lines = [
        "# Modality ablation",
        "",
        CAPACITY_NOTE,
        "",
        "| Model | Max. Accuracy | Smth. Max. Accuracy |",
        "|---|---|---|",
    ]
    for report in rows:
        lines.append(
            f"| {report.config_label.capitalize()} "
            f"| {report.max_accuracy:.3f} "
            f"| {report.smoothed_max_accuracy:.3f} |")
    baseline = rows[0].baseline_accuracy
    lines.append("")
    lines.append(f"Majority-class baseline accuracy (validation): {baseline:.3f}")
    lines.append("")
    lines.append("Average Precision on validation, best checkpoint per row:")
    for report in rows:
        lines.append(f"- {report.config_label.capitalize()}: {report.ap:.3f}")
    return "\n".join(lines) + "\n"


def reports_json_dict(reports) -> dict:
    return {
        "note": CAPACITY_NOTE,
        "reports": [r.to_json_dict() for r in reports],
        "table_order": [r.config_label for r in table_order(reports)],
    }


def save_reports_json(path, reports) -> None:
    text = json.dumps(reports_json_dict(reports), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")
