import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seededpf.evaluation import LabelMap, evaluate
from seededpf.posterior import Assignment


def assignments(topics, certainty=None):
    certainty = certainty or [1.0] * len(topics)
    return [Assignment(str(i), t, c) for i, (t, c) in enumerate(zip(topics, certainty))]


AB = LabelMap({0: "A", 1: "B"})


def test_perfect_predictions():
    r = evaluate(assignments([0, 1, 1, 0]), ["A", "B", "B", "A"], AB)
    assert r.accuracy == 1.0
    assert all(c.precision == c.recall == c.f1 == 1.0 for c in r.classes)
    assert r.macro == r.weighted == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_two_class_hand_count():
    r = evaluate(assignments([0, 0, 1]), ["A", "B", "B"], AB)
    a, b = r.by_label("A"), r.by_label("B")
    assert (a.precision, a.recall, b.precision, b.recall) == (0.5, 1.0, 1.0, 0.5)
    assert r.accuracy == pytest.approx(2 / 3)
    assert r.confusion.tolist() == [[1, 0], [1, 1]]


def test_zero_division_flagged():
    r = evaluate(assignments([0, 0]), ["A", "B"], AB)
    b = r.by_label("B")
    assert b.precision == 0.0 and b.precision_undefined and not b.recall_undefined
    assert math.isnan(b.tp_certainty) and math.isnan(b.fp_certainty)
    assert "*" in r.render()
    assert json.loads(r.to_json())["classes"][1]["tp_certainty"] is None


def test_unmapped_topic_counts_as_error():
    r = evaluate(assignments([0, 2, 1]), ["A", "A", "B"], AB)
    assert r.accuracy == pytest.approx(2 / 3)
    assert r.by_label("A").recall == 0.5
    assert r.confusion_columns == ["A", "B", "(unmapped)"]
    assert r.confusion.tolist() == [[1, 0, 1], [0, 1, 0]]


def test_unmapped_gold_label_rejected():
    with pytest.raises(ValueError):
        evaluate(assignments([0]), ["C"], AB)
    with pytest.raises(ValueError):
        evaluate(assignments([0, 1]), ["A"], AB)
    with pytest.raises(ValueError):
        LabelMap({0: "A", 1: "A"})


def test_label_map_from_names():
    m = LabelMap.from_topic_names(["Toys", "Books", "unseeded_1"], ["Books", "Toys"])
    assert m.topic_to_label == {0: "Toys", 1: "Books"}
    assert m.label(2) is None


def test_certainty_summaries():
    r = evaluate(assignments([0, 0, 1, 0], [0.9, 0.5, 0.7, 0.6]), ["A", "B", "B", "A"], AB)
    a = r.by_label("A")
    assert a.tp_certainty == pytest.approx(0.75) and a.fp_certainty == pytest.approx(0.5)


def test_exports(tmp_path):
    r = evaluate(assignments([0, 0, 1]), ["A", "B", "B"], AB)
    r.to_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["accuracy"] == pytest.approx(2 / 3) and data["confusion"]["counts"] == [[1, 0], [1, 1]]
    r.to_csv(tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "key,value" and "A.precision,0.5" in rows
    text = r.render()
    assert text.splitlines()[0].split() == ["True", "label", "Precision", "Recall", "F1-score", "TP", "cert",
                                            "FP", "cert", "Count"]
    assert "Accuracy: 0.67" in text


labels = st.sampled_from(["A", "B", "C"])


@given(st.lists(st.tuples(st.integers(0, 3), labels, st.floats(0.1, 1.0)), min_size=1, max_size=40))
def test_report_properties(rows):
    label_map = LabelMap({0: "A", 1: "B", 2: "C"})
    topics, gold, cert = zip(*rows)
    r = evaluate(assignments(list(topics), list(cert)), list(gold), label_map)
    for c in r.classes:
        assert 0 <= c.precision <= 1 and 0 <= c.recall <= 1 and 0 <= c.f1 <= 1
    assert r.accuracy == pytest.approx(r.weighted["recall"], abs=1e-12)
    f1s = [c.f1 for c in r.classes]
    assert min(f1s) - 1e-12 <= r.macro["f1"] <= max(f1s) + 1e-12
    assert r.confusion.sum() == len(rows)


@given(st.lists(st.tuples(st.integers(0, 2), labels), min_size=1, max_size=30), st.permutations([0, 1, 2]))
def test_permutation_invariance(rows, perm):
    topics, gold = zip(*rows)
    base = evaluate(assignments(list(topics)), list(gold), LabelMap({0: "A", 1: "B", 2: "C"}))
    permuted_map = LabelMap({perm[k]: lab for k, lab in {0: "A", 1: "B", 2: "C"}.items()})
    moved = evaluate(assignments([perm[t] for t in topics]), list(gold), permuted_map)
    assert base.accuracy == moved.accuracy and base.macro == moved.macro
