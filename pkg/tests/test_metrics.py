import numpy as np
import pytest

from surreval.errors import DegenerateInputError, InputError
from surreval.metrics import (
    MetricVector,
    classification_summary,
    pr_auc,
    regression_summary,
    roc_auc,
)


# ---------------------------------------------------------------------------
# Brute-force oracles (quadratic-time, written first; the implementations are
# checked against these on random instances).
# ---------------------------------------------------------------------------

def roc_auc_oracle(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    pos = scores[labels == 1.0]
    neg = scores[labels == 0.0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)


def pr_auc_oracle(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n_pos = labels.sum()
    area = 0.0
    prev_recall = 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        pred = scores >= t
        tp = float(np.sum(pred & (labels == 1.0)))
        fp = float(np.sum(pred & (labels == 0.0)))
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def confusion_oracle(scores, labels, threshold=0.5):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    pred = scores >= threshold
    tp = float(np.sum(pred & (labels == 1.0)))
    fp = float(np.sum(pred & (labels == 0.0)))
    fn = float(np.sum(~pred & (labels == 1.0)))
    tn = float(np.sum(~pred & (labels == 0.0)))
    acc = (tp + tn) / labels.size
    recall = tp / (tp + fn)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return acc, recall, precision, f1


def random_binary_instance(rng, max_n=50, ties=False):
    while True:
        n = int(rng.integers(4, max_n + 1))
        labels = (rng.random(n) < 0.5).astype(float)
        if 0.0 < labels.mean() < 1.0:
            break
    scores = rng.random(n)
    if ties:
        scores = np.round(scores, 1)
    return scores, labels


def test_roc_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_roc_auc_matches_oracle_exactly():
    rng = np.random.default_rng(42)
    for i in range(200):
        scores, labels = random_binary_instance(rng, ties=(i % 2 == 0))
        assert roc_auc(scores, labels) == roc_auc_oracle(scores, labels)


def test_pr_auc_matches_oracle():
    rng = np.random.default_rng(43)
    for i in range(200):
        scores, labels = random_binary_instance(rng, ties=(i % 3 == 0))
        assert pr_auc(scores, labels) == pytest.approx(pr_auc_oracle(scores, labels), abs=1e-12)


def test_confusion_metrics_match_oracle():
    rng = np.random.default_rng(44)
    for i in range(200):
        scores, labels = random_binary_instance(rng, ties=(i % 2 == 0))
        mv = classification_summary(scores, labels)
        acc, recall, precision, f1 = confusion_oracle(scores, labels)
        assert mv["acc"] == pytest.approx(acc, abs=1e-12)
        assert mv["recall"] == pytest.approx(recall, abs=1e-12)
        assert mv["precision"] == pytest.approx(precision, abs=1e-12)
        assert mv["f1"] == pytest.approx(f1, abs=1e-12)


def test_classification_summary_examples():
    mv = classification_summary([1.0, 1.0, 0.0, 0.0], [1, 1, 0, 0])
    assert all(mv[k] == 1.0 for k in ("acc", "recall", "precision", "f1", "roc_auc"))
    mv = classification_summary([0.9, 0.9, 0.9, 0.9], [1, 1, 0, 0])
    assert mv["acc"] == 0.5
    assert mv["recall"] == 1.0
    assert mv["precision"] == 0.5
    assert mv["f1"] == pytest.approx(2.0 / 3.0)
    with pytest.raises(DegenerateInputError):
        classification_summary([0.2, 0.4, 0.6], [0, 0, 0])


def test_roc_auc_degenerate_and_invariances():
    with pytest.raises(DegenerateInputError):
        roc_auc([0.1, 0.2], [1, 1])
    rng = np.random.default_rng(45)
    for _ in range(30):
        scores, labels = random_binary_instance(rng)
        a = roc_auc(scores, labels)
        assert roc_auc(-scores, labels) == pytest.approx(1.0 - a, abs=1e-12)
        assert roc_auc(np.exp(3.0 * scores), labels) == pytest.approx(a, abs=1e-12)


def test_regression_summary_examples():
    mv = regression_summary([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert mv["rmse"] == 0.0 and mv["mae"] == 0.0 and mv["mse"] == 0.0 and mv["r2"] == 1.0
    targets = np.array([1.0, 2.0, 3.0, 4.0])
    mv = regression_summary(np.full(4, targets.mean()), targets)
    assert mv["r2"] == pytest.approx(0.0, abs=1e-12)
    mv = regression_summary([1.0, 2.0], [2.0, 4.0])
    assert mv["rmse"] == pytest.approx(np.sqrt(2.5))
    assert mv["mae"] == pytest.approx(1.5)
    assert mv["mape"] == pytest.approx(0.5)


def test_regression_degenerate_cases():
    with pytest.raises(DegenerateInputError):
        regression_summary([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(DegenerateInputError):
        regression_summary([1.0, 2.0], [0.0, 1e-13])
    # mape skips near-zero targets but keeps the rest
    mv = regression_summary([1.0, 2.0, 1.0], [0.0, 4.0, 2.0])
    assert mv["mape"] == pytest.approx(0.5 * (2.0 / 4.0 + 1.0 / 2.0))


def test_mse_rmse_and_f1_identities():
    rng = np.random.default_rng(46)
    for _ in range(30):
        preds = rng.normal(size=20)
        targets = rng.normal(size=20)
        mv = regression_summary(preds, targets)
        assert mv["mse"] == pytest.approx(mv["rmse"] ** 2, abs=1e-12)
        scores, labels = random_binary_instance(rng)
        mv = classification_summary(scores, labels)
        if mv["precision"] > 0 and mv["recall"] > 0:
            expect = 2 / (1 / mv["precision"] + 1 / mv["recall"])
            assert mv["f1"] == pytest.approx(expect, abs=1e-12)


def test_metric_vector_validation_and_json():
    with pytest.raises(InputError):
        MetricVector("classification", {"roc_auc": 1.0})
    mv = regression_summary([1.0, 2.0], [2.0, 4.0])
    doc = mv.to_json()
    assert set(doc) == {"rmse", "r2", "mae", "mape", "mse"}
    with pytest.raises(InputError):
        roc_auc([0.1, 0.2], [0.5, 1.0])
    with pytest.raises(InputError):
        regression_summary([1.0], [1.0, 2.0])
