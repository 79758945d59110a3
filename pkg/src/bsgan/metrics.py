"""Binary classification metrics (minority = positive) and interclass distance."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyClass, EmptyMatrix, LengthMismatch, OneClassOnly


class UndefinedMetricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def misclassified(self):
        return self.fp + self.fn

    def as_grid(self):
        """Rows = true class (0, 1), columns = predicted class (0, 1)."""
        return [[self.tn, self.fp], [self.fn, self.tp]]


def _binary(v, name):
    v = np.asarray(v).ravel()
    if np.any((v != 0) & (v != 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return v.astype(np.int64)


def confusion(pred, truth):
    pred = _binary(pred, "pred")
    truth = _binary(truth, "truth")
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {truth.size} labels")
    if pred.size == 0:
        raise EmptyMatrix("nothing to evaluate")
    return ConfusionMatrix(
        tp=int(np.sum((pred == 1) & (truth == 1))),
        fp=int(np.sum((pred == 1) & (truth == 0))),
        tn=int(np.sum((pred == 0) & (truth == 0))),
        fn=int(np.sum((pred == 0) & (truth == 1))),
    )


def _ratio(num, den, name):
    if den == 0:
        warnings.warn(f"{name} is undefined (zero denominator); reported as 0", UndefinedMetricWarning,
                      stacklevel=3)
        return 0.0
    return num / den


def accuracy(cm):
    if cm.total == 0:
        raise EmptyMatrix("empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def precision(cm):
    return _ratio(cm.tp, cm.tp + cm.fp, "precision")


def recall(cm):
    # tp / (tp + fn); the tn + fp denominator sometimes printed for this is a typo
    return _ratio(cm.tp, cm.tp + cm.fn, "recall")


def f1(cm):
    p, r = precision(cm), recall(cm)
    return _ratio(2 * p * r, p + r, "f1")


def undefined_metrics(cm):
    names = []
    if cm.tp + cm.fp == 0:
        names.append("precision")
    if cm.tp + cm.fn == 0:
        names.append("recall")
    if cm.tp == 0:
        names.append("f1")
    return tuple(names)


def auc(scores, truth):
    """Rank-sum AUC: ``(sum of positive ranks - P(P+1)/2) / (P * N)``, average ranks for ties."""
    s = np.asarray(scores, dtype=float).ravel()
    t = _binary(truth, "truth")
    if s.shape != t.shape:
        raise LengthMismatch(f"{s.size} scores vs {t.size} labels")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("AUC needs both classes")
    ranks = rankdata(s, method="average")
    return float((ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores, truth):
    """(fpr, tpr) at every distinct score threshold, from (0, 0) to (1, 1)."""
    s = np.asarray(scores, dtype=float).ravel()
    t = _binary(truth, "truth")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(t)[last]
    fps = (last + 1) - tps
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    return list(zip(fpr.tolist(), tpr.tolist()))


def write_roc_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr"])
        w.writerows((repr(a), repr(b)) for a, b in points)


def interclass_distance(d):
    """``||mu_1 - mu_0|| / sqrt(1/n_1 + 1/n_0)`` over per-class feature means."""
    x, y = d.features, d.labels
    n1 = int(np.sum(y == 1))
    n0 = int(np.sum(y == 0))
    if n1 == 0 or n0 == 0:
        raise EmptyClass("interclass distance needs both classes")
    diff = x[y == 1].mean(axis=0) - x[y == 0].mean(axis=0)
    return float(np.linalg.norm(diff) / np.sqrt(1.0 / n1 + 1.0 / n0))


@dataclass(frozen=True)
class EvalReport:
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    interclass_distance: float = float("nan")
    undefined: tuple = field(default=())

    @classmethod
    def from_scores(cls, scores, truth, threshold=0.5, interclass=float("nan")):
        scores = np.asarray(scores, dtype=float).ravel()
        pred = (scores >= threshold).astype(np.int64)
        cm = confusion(pred, truth)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UndefinedMetricWarning)
            return cls(
                confusion=cm,
                accuracy=accuracy(cm),
                precision=precision(cm),
                recall=recall(cm),
                f1=f1(cm),
                auc=auc(scores, truth),
                interclass_distance=interclass,
                undefined=undefined_metrics(cm),
            )

    def consistent(self):
        """True when every stored metric equals its recomputation from the confusion matrix."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UndefinedMetricWarning)
            cm = self.confusion
            return (accuracy(cm), precision(cm), recall(cm), f1(cm)) == (
                self.accuracy, self.precision, self.recall, self.f1)
