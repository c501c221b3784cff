"""Confusion matrices, precision/recall/F1, and the CASE1/CASE2 accuracy algebra."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

__all__ = [
    "ConfusionMatrix",
    "ClassMetrics",
    "confusion",
    "precision_recall_f1",
    "class_report",
    "case1_accuracy",
    "sensing_accuracy",
    "case2_accuracies",
    "chain_accuracy",
    "PAPER_CASE1_PEAK",
    "metrics_csv",
    "accuracy_csv",
]

# reference point quoted for the measured dataset; not a target for synthetic data
PAPER_CASE1_PEAK = 0.92


@dataclass(eq=False)
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InvalidInput("confusion matrix must be square")
        if np.any(c < 0):
            raise InvalidInput("confusion counts must be non-negative")
        self.counts = c.astype(np.int64)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return _ratio(np.trace(self.counts), self.total)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int = 0


def _ratio(num, den) -> float:
    return float(num) / float(den) if den else 0.0


def confusion(preds, truth, k: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if preds.shape != truth.shape:
        raise InvalidInput(f"{len(preds)} predictions for {len(truth)} labels")
    if preds.size and (min(preds.min(), truth.min()) < 0 or max(preds.max(), truth.max()) >= k):
        raise InvalidInput(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truth, preds), 1)
    return ConfusionMatrix(counts)


def precision_recall_f1(c: ConfusionMatrix, class_idx: int) -> ClassMetrics:
    tp = int(c.counts[class_idx, class_idx])
    fp = int(c.counts[:, class_idx].sum()) - tp
    fn = int(c.counts[class_idx, :].sum()) - tp
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return ClassMetrics(p, r, f1, tp + fn)


def class_report(c: ConfusionMatrix) -> tuple[list[ClassMetrics], ClassMetrics]:
    """Per-class metrics and their unweighted (macro) average."""
    rows = [precision_recall_f1(c, i) for i in range(c.k)]
    macro = ClassMetrics(
        float(np.mean([m.precision for m in rows])),
        float(np.mean([m.recall for m in rows])),
        float(np.mean([m.f1 for m in rows])),
        sum(m.support for m in rows),
    )
    return rows, macro


def case1_accuracy(preds, truth) -> float:
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise InvalidInput("prediction and label counts differ")
    return _ratio(np.sum(preds == truth), truth.size)


def sensing_accuracy(sense_preds, sense_truth) -> tuple[float, float, float]:
    """(P(occupied | H1), P(empty | H0), prior-weighted sensing accuracy)."""
    p = np.asarray(sense_preds).astype(bool)
    t = np.asarray(sense_truth).astype(bool)
    if p.shape != t.shape:
        raise InvalidInput("sensing prediction and label counts differ")
    n1, n0 = int(t.sum()), int((~t).sum())
    pd = _ratio(np.sum(p & t), n1)
    pn = _ratio(np.sum(~p & ~t), n0)
    n = n0 + n1
    weighted = _ratio(n1, n) * pd + _ratio(n0, n) * pn
    return pd, pn, weighted


def case2_accuracies(sense_preds, sense_truth, cls_preds, cls_truth) -> tuple[float, float, float]:
    """(P_S, P_C, P_S * P_C).

    P_S weights the two conditional detection rates by the empirical H1/H0
    priors; P_C is plain accuracy over H1-only classification results.
    """
    cls_truth = np.asarray(cls_truth)
    if cls_truth.size == 0:
        raise InvalidInput("classification accuracy needs at least one H1 example")
    _, _, ps = sensing_accuracy(sense_preds, sense_truth)
    pc = case1_accuracy(cls_preds, cls_truth)
    return ps, pc, ps * pc


def chain_accuracy(true_labels, sense_preds, cls_preds) -> float:
    """Accuracy of sense-then-classify on the full label set (0 = noise).

    An H0 example is right only if the detector leaves it empty; an H1 example
    is right only if it is detected and then classified correctly.
    """
    y = np.asarray(true_labels)
    s = np.asarray(sense_preds).astype(bool)
    c = np.asarray(cls_preds)
    if not (y.shape == s.shape == c.shape):
        raise InvalidInput("chain inputs differ in length")
    ok = np.where(y == 0, ~s, s & (c == y))
    return _ratio(ok.sum(), y.size)


def metrics_csv(rows) -> str:
    """Table-2-shaped CSV; ``rows`` holds (experiment, snr_db, class, Π, Ψ, F1)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "snr_db", "class", "precision", "recall", "f1"])
    for exp, snr, cls, p, r, f in rows:
        w.writerow([exp, _fmt(snr), cls, f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])
    return buf.getvalue()


def accuracy_csv(curves: dict[str, dict[float, float]]) -> str:
    """One column per curve, one row per SNR."""
    snrs = sorted({s for c in curves.values() for s in c})
    names = list(curves)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", *names])
    for s in snrs:
        w.writerow([_fmt(s), *(f"{curves[n][s]:.6f}" if s in curves[n] else "" for n in names)])
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{x:g}"
