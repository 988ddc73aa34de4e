"""Evaluation metrics: max / smoothed-max accuracy, PR curve with Average
Precision, and the majority-class baseline.

The smoothed maximum uses an exponential moving average initialized at the
first observation, so a constant curve is a fixed point and the smoothed
maximum can never exceed the raw maximum.

AP is the step-interpolated variant: scores are sorted descending with
ties grouped (a threshold either admits a score value or it does not), and
AP = sum over the sweep of (R_k - R_(k-1)) * P_k.  The sum is accumulated
in exact rational arithmetic and converted to float once at the end, so it
agrees bit-for-bit with brute-force oracles built from the same counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .feature_store import Dataset
from .trainer import CurveLog


@dataclass(frozen=True)
class MetricsReport:
    """Per-configuration evaluation summary, shaped like one table row."""

    config_label: str
    max_accuracy: float
    smoothed_max_accuracy: float
    baseline_accuracy: float
    ap: float
    pr_curve: tuple[tuple[float, float], ...]  # (recall, precision) points

    def __post_init__(self):
        object.__setattr__(self, "pr_curve",
                           tuple((float(r), float(p)) for r, p in self.pr_curve))
        for name in ("max_accuracy", "smoothed_max_accuracy",
                     "baseline_accuracy", "ap"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        # Tiny float slack: both are maxima of the same curve under
        # convex averaging, so the inequality is structural.
        if self.smoothed_max_accuracy > self.max_accuracy + 1e-12:
            raise ValueError(
                f"smoothed max {self.smoothed_max_accuracy} exceeds "
                f"max {self.max_accuracy}")

    def to_json_dict(self) -> dict:
        return {
            "config_label": self.config_label,
            "max_accuracy": self.max_accuracy,
            "smoothed_max_accuracy": self.smoothed_max_accuracy,
            "baseline_accuracy": self.baseline_accuracy,
            "ap": self.ap,
            "pr_curve": [[r, p] for r, p in self.pr_curve],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MetricsReport":
        return cls(
            config_label=obj["config_label"],
            max_accuracy=obj["max_accuracy"],
            smoothed_max_accuracy=obj["smoothed_max_accuracy"],
            baseline_accuracy=obj["baseline_accuracy"],
            ap=obj["ap"],
            pr_curve=tuple((r, p) for r, p in obj["pr_curve"]),
        )

    def save(self, path) -> None:
        text = json.dumps(self.to_json_dict(), indent=2, sort_keys=True)
        Path(path).write_text(text + "\n", encoding="utf-8")


def max_accuracy(curve: CurveLog) -> float:
    """Maximum of the validation accuracy curve."""
    if not curve.val_accuracy:
        raise ValueError("empty validation accuracy curve")
    return max(acc for _, acc in curve.val_accuracy)


def smoothed_max_accuracy(curve: CurveLog, momentum: float = 0.9) -> float:
    """Maximum of the EMA-smoothed validation accuracy curve.

    s_0 = a_0; s_t = momentum*s_(t-1) + (1-momentum)*a_t.  The incremental
    form s += (1-momentum)*(a-s) keeps constant curves exact fixed points.
    """
    if not curve.val_accuracy:
        raise ValueError("empty validation accuracy curve")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    values = [acc for _, acc in curve.val_accuracy]
    smoothed = values[0]
    best = smoothed
    for acc in values[1:]:
        smoothed += (1.0 - momentum) * (acc - smoothed)
        if smoothed > best:
            best = smoothed
    return best


def pr_curve_and_ap(scores, labels) -> tuple[list[tuple[float, float]], float]:
    """Precision-recall sweep over distinct score thresholds, plus AP.

    Returns ([(recall, precision), ...] in sweep order, ap).  Positive
    class is label 1.  Ties share a threshold, so reordering tied scores
    cannot change the result.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(
            f"scores and labels must be equal-length vectors, "
            f"got {scores.shape} and {labels.shape}")
    label_values = set(np.unique(labels).tolist())
    if not label_values <= {0, 1}:
        raise ValueError(f"labels must be 0 or 1, got values {sorted(label_values)}")
    positives = int(np.sum(labels == 1))
    if positives == 0:
        raise ValueError("PR curve undefined without positive labels")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]

    points: list[tuple[float, float]] = []
    ap = Fraction(0)
    true_pos = 0
    prev_true_pos = 0
    n = len(sorted_scores)
    for i in range(n):
        true_pos += int(sorted_labels[i] == 1)
        at_group_end = i + 1 == n or sorted_scores[i + 1] != sorted_scores[i]
        if not at_group_end:
            continue
        predicted_pos = i + 1
        precision = Fraction(true_pos, predicted_pos)
        recall = Fraction(true_pos, positives)
        points.append((float(recall), float(precision)))
        ap += Fraction(true_pos - prev_true_pos, positives) * precision
        prev_true_pos = true_pos
    return points, float(ap)


def baseline_accuracy(ds: Dataset, ids) -> float:
    """Majority-class fraction among the given ids (the accuracy of a
    constant predictor of the more frequent class)."""
    ids = list(ids)
    if not ids:
        raise ValueError("empty id list")
    n1 = sum(ds.get(i).label for i in ids)
    n0 = len(ids) - n1
    return max(n0, n1) / len(ids)


def write_pr_csv(path, pr_curve) -> None:
    lines = ["recall,precision"]
    lines += [f"{r!r},{p!r}" for r, p in pr_curve]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
