"""Note-level scoring of predicted diagnoses against the gold standard.

Each category (stage, grade, extent) is scored one-vs-rest per class,
where "none" (no value) is itself a class: the point of the exercise is
finding missed diagnoses, so predicting nothing is a real outcome. All
0/0 metric ratios are 0 by convention, flagged in the report. Aggregates
cover classes with nonzero gold support; variants excluding the "none"
class are reported alongside for comparability.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import GoldAnnotation
from .seeding import CanonicalDiagnosis
from .vocab import CATEGORIES

NONE_CLASS = "none"

# Fixed class display order per category; "none" sorts last.
_CLASS_ORDER = {
    "stage": ("I", "II", "III", "IV", NONE_CLASS),
    "grade": ("A", "B", "C", NONE_CLASS),
    "extent": ("localized", "generalized", NONE_CLASS),
}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricSet:
    precision: float
    recall: float
    specificity: float
    f1: float
    support: int


def _ratio(numerator: int | float, denominator: int | float) -> float:
    return numerator / denominator if denominator else 0.0


def confusion(
    gold: Sequence[Optional[str]], pred: Sequence[Optional[str]], cls: str
) -> ConfusionCounts:
    """One-vs-rest counts for *cls* over aligned gold/pred values."""
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} entries, pred has {len(pred)}")
    tp = fp = tn = fn = 0
    for g, p in zip(gold, pred):
        g = g if g is not None else NONE_CLASS
        p = p if p is not None else NONE_CLASS
        if g == cls and p == cls:
            tp += 1
        elif g == cls:
            fn += 1
        elif p == cls:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(c: ConfusionCounts) -> MetricSet:
    """Precision, recall, specificity, and F1 with the 0/0 -> 0 convention."""
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    specificity = _ratio(c.tn, c.tn + c.fp)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return MetricSet(
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        support=c.tp + c.fn,
    )


def aggregate(per_class: Mapping[str, MetricSet]) -> tuple[MetricSet, MetricSet]:
    """(macro, weighted) averages over classes with nonzero support.

    Means are accumulated in exact rational arithmetic and rounded once,
    so e.g. the mean of (2/3, 1, 2/3) is the correctly rounded 7/9.
    """
    included = {cls: m for cls, m in per_class.items() if m.support > 0}
    if not included:
        raise ValueError("no class has nonzero support; nothing to aggregate")
    total_support = sum(m.support for m in included.values())
    n = len(included)

    def mean(attr: str) -> float:
        return float(sum(Fraction(getattr(m, attr)) for m in included.values()) / n)

    def weighted_mean(attr: str) -> float:
        total = sum(Fraction(getattr(m, attr)) * m.support for m in included.values())
        return float(total / total_support)

    macro = MetricSet(
        precision=mean("precision"),
        recall=mean("recall"),
        specificity=mean("specificity"),
        f1=mean("f1"),
        support=total_support,
    )
    weighted = MetricSet(
        precision=weighted_mean("precision"),
        recall=weighted_mean("recall"),
        specificity=weighted_mean("specificity"),
        f1=weighted_mean("f1"),
        support=total_support,
    )
    return macro, weighted


@dataclass(frozen=True)
class CategoryReport:
    counts: dict[str, ConfusionCounts]
    per_class: dict[str, MetricSet]
    macro_avg: MetricSet
    weighted_avg: MetricSet
    macro_avg_excl_none: Optional[MetricSet]
    weighted_avg_excl_none: Optional[MetricSet]


@dataclass(frozen=True)
class EvalReport:
    categories: dict[str, CategoryReport]
    notes_evaluated: int
    missing_prediction_ids: tuple[str, ...]
    extra_prediction_ids: tuple[str, ...]
    zero_division_convention: str = "0"


def evaluate_notes(
    gold: Sequence[GoldAnnotation],
    pred: Sequence[tuple[str, CanonicalDiagnosis]],
) -> EvalReport:
    """Score per-note predictions against gold annotations.

    Gold ids define the evaluated population; notes without a prediction
    count as all-absent, predictions for unknown ids are ignored. Both
    groups are listed in the report metadata.
    """
    gold_sorted = sorted(gold, key=lambda a: a.note_id)
    gold_ids = [a.note_id for a in gold_sorted]
    if len(set(gold_ids)) != len(gold_ids):
        dupes = sorted({i for i in gold_ids if gold_ids.count(i) > 1})
        raise ValueError(f"duplicate gold note ids: {dupes}")
    pred_ids = [note_id for note_id, _ in pred]
    if len(set(pred_ids)) != len(pred_ids):
        dupes = sorted({i for i in pred_ids if pred_ids.count(i) > 1})
        raise ValueError(f"duplicate predicted note ids: {dupes}")
    pred_map = dict(pred)
    missing = tuple(sorted(set(gold_ids) - set(pred_ids)))
    extra = tuple(sorted(set(pred_ids) - set(gold_ids)))

    categories: dict[str, CategoryReport] = {}
    for category in CATEGORIES:
        gold_values = [getattr(a, category) for a in gold_sorted]
        pred_values = [
            pred_map.get(note_id, CanonicalDiagnosis()).get(category) for note_id in gold_ids
        ]
        observed = {v if v is not None else NONE_CLASS for v in gold_values + pred_values}
        observed.add(NONE_CLASS)
        classes = [c for c in _CLASS_ORDER[category] if c in observed]
        counts = {cls: confusion(gold_values, pred_values, cls) for cls in classes}
        per_class = {cls: metrics(c) for cls, c in counts.items()}
        macro, weighted = aggregate(per_class)
        non_none = {cls: m for cls, m in per_class.items() if cls != NONE_CLASS}
        if any(m.support > 0 for m in non_none.values()):
            macro_xn, weighted_xn = aggregate(non_none)
        else:
            macro_xn = weighted_xn = None
        categories[category] = CategoryReport(
            counts=counts,
            per_class=per_class,
            macro_avg=macro,
            weighted_avg=weighted,
            macro_avg_excl_none=macro_xn,
            weighted_avg_excl_none=weighted_xn,
        )
    return EvalReport(
        categories=categories,
        notes_evaluated=len(gold_ids),
        missing_prediction_ids=missing,
        extra_prediction_ids=extra,
    )


def _metricset_dict(m: Optional[MetricSet]) -> Optional[dict]:
    if m is None:
        return None
    return {
        "precision": m.precision,
        "recall": m.recall,
        "specificity": m.specificity,
        "f1": m.f1,
        "support": m.support,
    }


def report_to_dict(report: EvalReport) -> dict:
    out: dict = {
        "notes_evaluated": report.notes_evaluated,
        "missing_prediction_ids": list(report.missing_prediction_ids),
        "extra_prediction_ids": list(report.extra_prediction_ids),
        "zero_division_convention": report.zero_division_convention,
        "categories": {},
    }
    for category, cat in report.categories.items():
        out["categories"][category] = {
            "classes": {
                cls: {
                    "tp": cat.counts[cls].tp,
                    "fp": cat.counts[cls].fp,
                    "tn": cat.counts[cls].tn,
                    "fn": cat.counts[cls].fn,
                    **_metricset_dict(cat.per_class[cls]),
                }
                for cls in cat.counts
            },
            "macro_avg": _metricset_dict(cat.macro_avg),
            "weighted_avg": _metricset_dict(cat.weighted_avg),
            "macro_avg_excl_none": _metricset_dict(cat.macro_avg_excl_none),
            "weighted_avg_excl_none": _metricset_dict(cat.weighted_avg_excl_none),
        }
    return out


def write_report_json(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


_CSV_HEADER = [
    "category", "class", "support", "tp", "fp", "tn", "fn",
    "precision", "recall", "specificity", "f1",
]


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """Flat per-class rows plus aggregate rows, chart-ready."""

    def fmt(x: float) -> str:
        return f"{x:.6f}"

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for category, cat in report.categories.items():
            for cls, c in cat.counts.items():
                m = cat.per_class[cls]
                writer.writerow(
                    [category, cls, m.support, c.tp, c.fp, c.tn, c.fn,
                     fmt(m.precision), fmt(m.recall), fmt(m.specificity), fmt(m.f1)]
                )
            for label, m in (
                ("macro_avg", cat.macro_avg),
                ("weighted_avg", cat.weighted_avg),
                ("macro_avg_excl_none", cat.macro_avg_excl_none),
                ("weighted_avg_excl_none", cat.weighted_avg_excl_none),
            ):
                if m is None:
                    continue
                writer.writerow(
                    [category, label, m.support, "", "", "", "",
                     fmt(m.precision), fmt(m.recall), fmt(m.specificity), fmt(m.f1)]
                )
