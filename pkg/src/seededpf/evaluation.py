"""Classification metrics for topic assignments against gold labels."""
import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class LabelMap:
    """Topic index to gold-label mapping; unmapped topics predict no label."""

    def __init__(self, topic_to_label):
        self.topic_to_label = {int(k): str(v) for k, v in topic_to_label.items()}
        labels = list(self.topic_to_label.values())
        if len(set(labels)) != len(labels):
            raise ValueError("label map must be injective")

    @classmethod
    def from_topic_names(cls, topic_names, gold_labels):
        """Map each topic whose name is also a gold label to that label."""
        gold = set(gold_labels)
        return cls({k: name for k, name in enumerate(topic_names) if name in gold})

    def label(self, topic):
        return self.topic_to_label.get(int(topic))

    @property
    def labels(self):
        return set(self.topic_to_label.values())


@dataclass
class ClassStats:
    label: str
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int
    tp_certainty: float
    fp_certainty: float
    precision_undefined: bool = False
    recall_undefined: bool = False


@dataclass
class ClassificationReport:
    classes: list
    macro: dict
    weighted: dict
    accuracy: float
    n_docs: int
    confusion: np.ndarray = None
    confusion_columns: list = field(default_factory=list)

    def by_label(self, label):
        for c in self.classes:
            if c.label == label:
                return c
        raise KeyError(label)

    def to_dict(self):
        def clean(x):
            return None if isinstance(x, float) and math.isnan(x) else x

        return {
            "accuracy": self.accuracy,
            "n_docs": self.n_docs,
            "classes": [{k: clean(v) for k, v in vars(c).items()} for c in self.classes],
            "macro_avg": self.macro,
            "weighted_avg": self.weighted,
            "confusion": {
                "rows": [c.label for c in self.classes],
                "columns": self.confusion_columns,
                "counts": self.confusion.tolist() if self.confusion is not None else None,
            },
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        """One ``key,value`` row per metric."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            w.writerow(["accuracy", repr(self.accuracy)])
            for c in self.classes:
                for k in ("precision", "recall", "f1", "support", "tp_certainty", "fp_certainty",
                          "precision_undefined", "recall_undefined"):
                    w.writerow([f"{c.label}.{k}", getattr(c, k)])
            for name, avg in (("macro_avg", self.macro), ("weighted_avg", self.weighted)):
                for k, v in avg.items():
                    w.writerow([f"{name}.{k}", v])

    def render(self):
        """Aligned text table: per-class metrics, TP/FP certainty, averages, accuracy."""
        width = max([len("Weighted avg")] + [len(c.label) for c in self.classes])

        def num(x):
            return "   -" if isinstance(x, float) and math.isnan(x) else f"{x:.2f}"

        head = f"{'True label':<{width}}  Precision  Recall  F1-score  TP cert  FP cert  Count"
        lines = [head, "-" * len(head)]
        for c in self.classes:
            p = num(c.precision) + ("*" if c.precision_undefined else " ")
            r = num(c.recall) + ("*" if c.recall_undefined else " ")
            lines.append(f"{c.label:<{width}}  {p:>9}  {r:>6}  {num(c.f1):>8}  {num(c.tp_certainty):>7}  "
                         f"{num(c.fp_certainty):>7}  {c.support:>5}")
        lines.append("-" * len(head))
        for name, avg in (("Macro avg", self.macro), ("Weighted avg", self.weighted)):
            lines.append(f"{name:<{width}}  {num(avg['precision']):>8}   {num(avg['recall']):>5}   "
                         f"{num(avg['f1']):>8}  {'':>7}  {'':>7}  {self.n_docs:>5}")
        lines.append(f"Accuracy: {self.accuracy:.2f}")
        if any(c.precision_undefined or c.recall_undefined for c in self.classes):
            lines.append("* undefined (empty denominator), reported as 0")
        return "\n".join(lines)


def _ratio(num, den):
    return (Fraction(num, den), False) if den else (Fraction(0), True)


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else Fraction(0)


def _mean(values):
    return float(np.mean(values)) if len(values) else float("nan")


def evaluate(assignments, gold_labels, label_map):
    """Precision, recall, F1, accuracy and certainty summaries.

    ``assignments`` are objects with ``topic`` and ``certainty`` attributes
    (see :class:`~seededpf.posterior.Assignment`).  Classes are the sorted
    gold labels.  Predictions on unmapped topics count as errors.
    """
    gold = [str(g) for g in gold_labels]
    if len(gold) != len(assignments):
        raise ValueError(f"{len(assignments)} assignments but {len(gold)} gold labels")
    missing = sorted(set(gold) - label_map.labels)
    if missing:
        raise ValueError(f"gold labels without a topic in the label map: {missing}")
    pred = [label_map.label(a.topic) for a in assignments]
    cert = np.array([a.certainty for a in assignments], dtype=np.float64)
    labels = sorted(set(gold))

    pred_arr = np.array(pred, dtype=object)
    gold_arr = np.array(gold, dtype=object)
    # ratios stay rational until the end so every reported value is correctly rounded
    stats, exact = [], {}
    for lab in labels:
        is_pred = pred_arr == lab
        is_gold = gold_arr == lab
        tp = int(np.sum(is_pred & is_gold))
        fp = int(np.sum(is_pred & ~is_gold))
        fn = int(np.sum(~is_pred & is_gold))
        precision, p_undef = _ratio(tp, tp + fp)
        recall, r_undef = _ratio(tp, tp + fn)
        exact[lab] = (precision, recall, _f1(precision, recall))
        stats.append(ClassStats(
            lab, float(precision), float(recall), float(exact[lab][2]), int(is_gold.sum()), tp, fp, fn,
            _mean(cert[is_pred & is_gold]), _mean(cert[is_pred & ~is_gold]), p_undef, r_undef))

    total = sum(c.support for c in stats)
    macro, weighted = {}, {}
    for i, key in enumerate(("precision", "recall", "f1")):
        vals = [exact[c.label][i] for c in stats]
        macro[key] = float(sum(vals) / len(vals)) if vals else 0.0
        weighted[key] = float(sum(v * c.support for v, c in zip(vals, stats)) / total) if total else 0.0
    n = len(gold)
    accuracy = float(Fraction(sum(c.tp for c in stats), n)) if n else 0.0

    columns = labels + sorted({p for p in pred if p is not None and p not in labels})
    has_unmapped = any(p is None for p in pred)
    if has_unmapped:
        columns = columns + ["(unmapped)"]
    col_index = {c: i for i, c in enumerate(columns)}
    confusion = np.zeros((len(labels), len(columns)), dtype=np.int64)
    row_index = {lab: i for i, lab in enumerate(labels)}
    for g, p in zip(gold, pred):
        confusion[row_index[g], col_index[p if p is not None else "(unmapped)"]] += 1
    return ClassificationReport(stats, macro, weighted, accuracy, n, confusion, columns)
