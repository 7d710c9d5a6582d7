import csv

import numpy as np
import pytest
from sklearn.metrics import confusion_matrix as sk_confusion
from sklearn.metrics import precision_recall_fscore_support

from surfbench.dataset import Windows
from surfbench.evaluation import confusion_matrix, evaluate, report_from_labels
from surfbench.model import predict

from conftest import tiny_model


def test_hand_example():
    rep = report_from_labels([0, 0, 1, 1], [0, 1, 1, 1], 2, ("a", "b"))
    np.testing.assert_array_equal(rep.confusion, [[1, 1], [0, 2]])
    np.testing.assert_allclose(rep.precision, [1.0, 2 / 3], rtol=1e-15)
    np.testing.assert_allclose(rep.recall, [0.5, 1.0], rtol=1e-15)
    np.testing.assert_allclose(rep.f1, [2 / 3, 0.8], rtol=1e-15)
    assert rep.mean_accuracy == 0.75
    assert list(rep.support) == [2, 2]


def test_matches_sklearn(rng):
    y_true = rng.integers(0, 4, 500)
    y_pred = np.where(rng.random(500) < 0.7, y_true, rng.integers(0, 4, 500))
    rep = report_from_labels(y_true, y_pred, 4)
    np.testing.assert_array_equal(rep.confusion, sk_confusion(y_true, y_pred, labels=range(4)))
    p, r, f, s = precision_recall_fscore_support(y_true, y_pred, labels=range(4),
                                                 zero_division=0)
    np.testing.assert_allclose(rep.precision, p, rtol=1e-14)
    np.testing.assert_allclose(rep.recall, r, rtol=1e-14)
    np.testing.assert_allclose(rep.f1, f, rtol=1e-14)


def test_absent_class_scores_zero():
    rep = report_from_labels([0, 0, 1], [0, 0, 1], 3)
    assert rep.precision[2] == 0 and rep.recall[2] == 0 and rep.f1[2] == 0
    assert rep.mean_accuracy == 1.0


def test_label_range_checked():
    with pytest.raises(ValueError):
        confusion_matrix([0, 3], [0, 1], 3)
    with pytest.raises(ValueError):
        confusion_matrix([0, 1], [0], 3)


def test_evaluate_and_export(tmp_path, rng):
    model = tiny_model()
    X = rng.normal(size=(30, 20, 6))
    y = rng.integers(0, 3, 30)
    rep = evaluate(model, Windows(X, y, np.zeros(30, int), np.zeros(30, int)))
    assert rep.mean_accuracy == pytest.approx(np.mean(predict(model, X) == y))
    assert rep.confusion.sum() == 30
    rows = list(csv.reader(open(rep.write_confusion_csv(tmp_path / "c.csv"))))
    assert rows[0] == ["true\\predicted", "c0", "c1", "c2"]
    assert sum(int(v) for r in rows[1:] for v in r[1:]) == 30
    rows = list(csv.reader(open(rep.write_metrics_csv(tmp_path / "m.csv"))))
    assert rows[0] == ["class", "precision", "recall", "f1", "support"]
    assert float(rows[-1][-1]) == rep.mean_accuracy
    assert "Accuracy" in rep.table() and "c2" in rep.matrix()
