import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cyclosense.errors import InvalidInput
from cyclosense.metrics import (
    PAPER_CASE1_PEAK,
    ConfusionMatrix,
    accuracy_csv,
    case1_accuracy,
    case2_accuracies,
    chain_accuracy,
    class_report,
    confusion,
    metrics_csv,
    precision_recall_f1,
    sensing_accuracy,
)

labels = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=80)


def test_confusion_examples():
    c = confusion([0, 1, 1], [0, 0, 1], 2)
    assert c.counts.tolist() == [[1, 1], [0, 1]]
    assert not confusion([], [], 3).counts.any()
    d = confusion([0, 1, 2, 2], [0, 1, 2, 2], 3).counts
    assert np.array_equal(d, np.diag(np.diag(d)))


def test_confusion_errors():
    with pytest.raises(InvalidInput):
        confusion([0, 1], [0], 2)
    with pytest.raises(InvalidInput):
        confusion([0, 2], [0, 1], 2)
    with pytest.raises(InvalidInput):
        ConfusionMatrix(np.array([[1, -1], [0, 0]]))


@given(labels)
def test_confusion_row_sums_and_total(pairs):
    truth = [t for t, _ in pairs]
    preds = [p for _, p in pairs]
    c = confusion(preds, truth, 4)
    assert c.total == len(pairs)
    assert c.counts.sum(axis=1).tolist() == [truth.count(k) for k in range(4)]


def _with_counts(tp, fp, fn):
    # class 0 gets tp hits, fp false positives (truth 1) and fn misses (pred 1)
    return ConfusionMatrix(np.array([[tp, fn], [fp, 0]]))


def test_prf_substitution():
    m = precision_recall_f1(_with_counts(2, 1, 1), 0)
    assert (m.precision, m.recall, m.f1) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    m = precision_recall_f1(_with_counts(0, 0, 5), 0)
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
    rows, macro = class_report(confusion([0, 1, 2], [0, 1, 2], 3))
    assert all((r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0) for r in rows)
    assert macro.f1 == 1.0


@given(labels)
def test_f1_identity_and_bounds(pairs):
    c = confusion([p for _, p in pairs], [t for t, _ in pairs], 4)
    rows, macro = class_report(c)
    for r in rows:
        if r.precision + r.recall > 0:
            assert abs(r.f1 * (r.precision + r.recall) - 2 * r.precision * r.recall) < 1e-12
        else:
            assert r.f1 == 0.0
    assert 0.0 <= macro.f1 <= 1.0


def test_case1_accuracy():
    assert case1_accuracy([1, 2, 3, 0], [1, 2, 3, 0]) == 1.0
    assert case1_accuracy([1, 2, 0, 0], [1, 2, 3, 3]) == 0.5
    assert PAPER_CASE1_PEAK == 0.92
    with pytest.raises(InvalidInput):
        case1_accuracy([1], [1, 2])


def test_sensing_accuracy_example():
    pd, pn, w = sensing_accuracy([1, 0, 0, 0], [1, 1, 0, 0])
    assert (pd, pn, w) == (0.5, 1.0, 0.75)


def test_case2_paper_reference_product():
    # 100 sensing decisions with 96 right, 200 H1 classifications with 197 right
    truth_s = np.r_[np.ones(50), np.zeros(50)]
    pred_s = truth_s.copy()
    pred_s[:2] = 0
    pred_s[50:52] = 1
    cls_truth = np.tile([1, 2, 3, 1], 50)
    cls_pred = cls_truth.copy()
    cls_pred[:3] = cls_truth[:3] % 3 + 1
    ps, pc, po = case2_accuracies(pred_s, truth_s, cls_pred, cls_truth)
    assert ps == 0.96
    assert pc == 0.985
    assert po == 0.96 * 0.985
    assert round(po, 4) == 0.9456


def test_case2_perfect_and_errors():
    assert case2_accuracies([1, 0], [1, 0], [2, 3], [2, 3]) == (1.0, 1.0, 1.0)
    with pytest.raises(InvalidInput):
        case2_accuracies([1, 0], [1, 0], [], [])


def test_flag_everything_detector():
    truth_s = [1, 1, 0, 0]
    ps, pc, _ = case2_accuracies([1, 1, 1, 1], truth_s, [1, 2], [1, 2])
    assert ps == 0.5
    assert pc == 1.0


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50),
       st.lists(st.tuples(st.integers(1, 3), st.integers(1, 3)), min_size=1, max_size=50))
def test_overall_below_components(sense, cls):
    ps, pc, po = case2_accuracies([p for p, _ in sense], [t for _, t in sense], [p for p, _ in cls], [t for _, t in cls])
    assert po <= min(ps, pc) + 1e-15


def test_chain_accuracy_accounting():
    y = np.array([0, 0, 1, 2, 3, 3])
    sense = np.array([0, 1, 1, 0, 1, 1])
    cls = np.array([9, 1, 1, 2, 3, 1])
    # right: H0 left empty, class 1 detected+right, class 3 detected+right
    assert chain_accuracy(y, sense, cls) == 3 / 6
    assert chain_accuracy([0, 1], [0, 1], [0, 1]) == 1.0
    with pytest.raises(InvalidInput):
        chain_accuracy([0], [0, 1], [0])


def test_chain_matches_product_on_independent_errors():
    # detector misses 10% of H1 and never false-alarms; classifier wrong on 20%
    n = 1000
    y = np.r_[np.zeros(n, dtype=int), np.tile([1, 2, 3], n)[:n]]
    sense = (y != 0).astype(int)
    h1 = np.flatnonzero(y != 0)
    sense[h1[::10]] = 0
    cls = y.copy()
    k = np.arange(h1.size)
    wrong = h1[(k // 10) % 5 == 0]
    cls[wrong] = y[wrong] % 3 + 1
    ps, pc, po = case2_accuracies(sense, (y != 0).astype(int), cls[h1], y[h1])
    chain_h1 = chain_accuracy(y[h1], sense[h1], cls[h1])
    assert chain_h1 == pytest.approx(0.9 * 0.8, abs=1e-12)
    assert pc == 0.8 and ps == pytest.approx(0.95)


def test_metrics_csv_layout():
    text = metrics_csv([("case1", 10.0, 1, 0.5, 0.25, 1 / 3)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["experiment", "snr_db", "class", "precision", "recall", "f1"]
    assert rows[1] == ["case1", "10", "1", "0.500000", "0.250000", "0.333333"]


def test_accuracy_csv_layout():
    text = accuracy_csv({"A": {1.0: 0.5, 2.0: 1.0}, "B": {2.0: 0.25}})
    assert text.splitlines() == ["snr_db,A,B", "1,0.500000,", "2,1.000000,0.250000"]
