"""Classification metrics over generated labels.

Unparseable generations are counted as misclassifications in a dedicated
confusion column rather than dropped: a generative classifier answers for
its invalid output. Averages are macro over classes present in the truths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from vibrodiag.corpusgen import LabelSet
from vibrodiag.errors import LengthMismatch
from vibrodiag.synthbench import FaultType

REPORT_VERSION = 1


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    support: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class GroupMetrics:
    accuracy: float
    precision: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_f1: float
    per_class: tuple[ClassMetrics, ...]
    groups: dict  # "defective" / "non_defective" -> GroupMetrics
    confusion: tuple[tuple[int, ...], ...]  # truth rows x (classes + unparseable)
    n_samples: int
    n_unparseable: int

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_f1": self.macro_f1,
            "per_class": [
                {
                    "label": c.label,
                    "support": c.support,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                }
                for c in self.per_class
            ],
            "groups": {
                name: {
                    "accuracy": g.accuracy,
                    "precision": g.precision,
                    "f1": g.f1,
                    "support": g.support,
                }
                for name, g in self.groups.items()
            },
            "confusion": [list(row) for row in self.confusion],
            "n_samples": self.n_samples,
            "n_unparseable": self.n_unparseable,
        }


def _resolve_prediction(pred, strict: bool):
    """Accepts a Diagnosis or a bare optional string."""
    if pred is None or isinstance(pred, str):
        return pred
    if strict and pred.match_mode != "exact":
        return None
    return pred.parsed_label


def evaluate(predictions, truths, label_set: LabelSet, strict: bool = True) -> MetricsReport:
    """Confusion-matrix metrics for generated labels against ground truth.

    In strict mode only exact canonical generations count as class
    predictions (the exact-match accuracy of the headline experiments);
    otherwise substring-parsed labels are accepted too.
    """
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truths)} truths")
    if not truths:
        raise LengthMismatch("nothing to evaluate")
    labels = list(label_set.labels)
    index = {lab: i for i, lab in enumerate(labels)}
    c = len(labels)
    confusion = [[0] * (c + 1) for _ in range(c)]
    correct = 0
    for pred, truth in zip(predictions, truths):
        ti = index[truth]
        resolved = _resolve_prediction(pred, strict)
        pi = index.get(resolved, c) if resolved is not None else c
        confusion[ti][pi] += 1
        if pi == ti:
            correct += 1
    n = len(truths)
    n_unparseable = sum(row[c] for row in confusion)

    per_class = []
    for i, lab in enumerate(labels):
        support = sum(confusion[i])
        col = sum(confusion[r][i] for r in range(c))
        tp = confusion[i][i]
        precision = tp / col if col else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(ClassMetrics(lab, support, precision, recall, f1))

    present = [m for m in per_class if m.support > 0]
    macro_precision = sum(m.precision for m in present) / len(present)
    macro_f1 = sum(m.f1 for m in present) / len(present)

    healthy_idx = {
        i for i, e in enumerate(label_set.entries) if e.fault_type is FaultType.HEALTHY
    }
    groups = {}
    for name, idxs in (
        ("non_defective", healthy_idx),
        ("defective", set(range(c)) - healthy_idx),
    ):
        rows = [i for i in idxs if per_class[i].support > 0]
        support = sum(per_class[i].support for i in rows)
        if rows and support:
            acc = sum(confusion[i][i] for i in rows) / support
            prec = sum(per_class[i].precision for i in rows) / len(rows)
            f1 = sum(per_class[i].f1 for i in rows) / len(rows)
        else:
            acc = prec = f1 = 0.0
        groups[name] = GroupMetrics(accuracy=acc, precision=prec, f1=f1, support=support)

    return MetricsReport(
        accuracy=correct / n,
        macro_precision=macro_precision,
        macro_f1=macro_f1,
        per_class=tuple(per_class),
        groups=groups,
        confusion=tuple(tuple(row) for row in confusion),
        n_samples=n,
        n_unparseable=n_unparseable,
    )


def report_render(report: MetricsReport, format: str = "json") -> str:
    """Stable serialization; identical reports render to identical bytes."""
    if format == "json":
        return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    if format == "text-table":
        lines = []
        lines.append(f"samples: {report.n_samples}   unparseable: {report.n_unparseable}")
        lines.append(
            f"accuracy: {report.accuracy:.2%}   macro precision: "
            f"{report.macro_precision:.2%}   macro F1: {report.macro_f1:.2%}"
        )
        lines.append("")
        header = f"{'class':<32}{'support':>8}{'precision':>11}{'recall':>9}{'f1':>9}"
        lines.append(header)
        lines.append("-" * len(header))
        for m in report.per_class:
            lines.append(
                f"{m.label:<32}{m.support:>8}{m.precision:>10.2%}"
                f"{m.recall:>8.2%}{m.f1:>8.2%}"
            )
        lines.append("")
        for name in ("non_defective", "defective"):
            g = report.groups[name]
            lines.append(
                f"{name:<16} accuracy {g.accuracy:>8.2%}  precision {g.precision:>8.2%}"
                f"  f1 {g.f1:>8.2%}  (n={g.support})"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")
