"""Confusion-matrix metrics and per-trait report tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import TRAITS, TRAIT_SHORT
from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Scores:
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion(preds: Sequence[bool], labels: Sequence[bool]) -> ConfusionCounts:
    """Counts with positive = trait present."""
    p = np.asarray(preds, dtype=bool)
    y = np.asarray(labels, dtype=bool)
    if p.shape != y.shape or p.ndim != 1 or p.size == 0:
        raise DimensionError(f"prediction/label vectors disagree: {p.shape} vs {y.shape}")
    return ConfusionCounts(
        tp=int(np.sum(p & y)),
        fp=int(np.sum(p & ~y)),
        fn=int(np.sum(~p & y)),
        tn=int(np.sum(~p & ~y)),
    )


def score(counts: ConfusionCounts) -> Scores:
    """Accuracy, precision, recall, F1; zero denominators score 0."""
    if counts.total <= 0:
        raise ConfigurationError("cannot score zero samples")
    accuracy = (counts.tp + counts.tn) / counts.total
    precision = counts.tp / (counts.tp + counts.fp) if (counts.tp + counts.fp) else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if (counts.tp + counts.fn) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return Scores(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


@dataclass
class TraitReport:
    """Per-trait percentages (unrounded); render rounds to two decimals."""

    rows: dict[str, Scores]  # trait -> scores as fractions scaled to percent

    def average(self) -> Scores:
        return Scores(
            accuracy=float(np.mean([self.rows[t].accuracy for t in TRAITS])),
            precision=float(np.mean([self.rows[t].precision for t in TRAITS])),
            recall=float(np.mean([self.rows[t].recall for t in TRAITS])),
            f1=float(np.mean([self.rows[t].f1 for t in TRAITS])),
        )

    def as_dict(self) -> dict:
        def cells(s: Scores) -> dict:
            return {
                "accuracy": round(s.accuracy, 2),
                "f1": round(s.f1, 2),
                "precision": round(s.precision, 2),
                "recall": round(s.recall, 2),
            }

        out = {TRAIT_SHORT[t]: cells(self.rows[t]) for t in TRAITS}
        out["Average"] = cells(self.average())
        return out


def evaluate_traits(per_trait: Mapping[str, tuple[Sequence[bool], Sequence[bool]]]) -> TraitReport:
    """Score (predictions, labels) pairs for all five traits."""
    missing = [t for t in TRAITS if t not in per_trait]
    if missing:
        raise ConfigurationError(f"missing traits in evaluation input: {missing}")
    rows = {}
    for trait in TRAITS:
        preds, labels = per_trait[trait]
        s = score(confusion(preds, labels))
        rows[trait] = Scores(
            accuracy=100.0 * s.accuracy,
            precision=100.0 * s.precision,
            recall=100.0 * s.recall,
            f1=100.0 * s.f1,
        )
    return TraitReport(rows=rows)


def render_markdown(report: TraitReport) -> str:
    """Markdown table: one row per trait plus the average row."""
    lines = [
        "| Personality Trait | Accuracy(%) | F1(%) | Precision(%) | Recall(%) |",
        "|---|---|---|---|---|",
    ]
    table = report.as_dict()
    for key in [TRAIT_SHORT[t] for t in TRAITS] + ["Average"]:
        cells = table[key]
        lines.append(
            f"| {key} | {cells['accuracy']:.2f} | {cells['f1']:.2f} "
            f"| {cells['precision']:.2f} | {cells['recall']:.2f} |"
        )
    return "\n".join(lines)
