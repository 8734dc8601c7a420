"""Per-relation binary link classifiers over combined entity embeddings."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .splits import RelationSplit
from .stats import midranks


class CombineOp(str, Enum):
    CONCAT = "concat"
    SUM = "sum"
    MEAN = "mean"
    HADAMARD = "hadamard"


class UnevaluableError(ValueError):
    """Not enough usable examples to fit a classifier."""


def combine(op: CombineOp | str, u, v) -> np.ndarray:
    """Link representation from two entity vectors (row-wise for 2-D input)."""
    op = CombineOp(op)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if op is CombineOp.CONCAT:
        return np.concatenate([u, v], axis=-1)
    if op is CombineOp.SUM:
        return u + v
    if op is CombineOp.MEAN:
        return (u + v) / 2.0
    return u * v


@dataclass(frozen=True)
class LogRegConfig:
    l2: float = 1.0
    max_iter: int = 500
    tol: float = 1e-6


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    n_iter: int = 0

    def decision(self, features) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.weights + self.bias

    def predict_proba(self, features) -> np.ndarray:
        z = self.decision(features)
        return np.exp(-np.logaddexp(0.0, -z))


def _objective(X, y, w, b, l2):
    z = X @ w + b
    # sum of -log p(y|x); y in {0, 1}
    loss = np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    p = np.exp(-np.logaddexp(0.0, -z))
    r = p - y
    return loss, X.T @ r + l2 * w, float(r.sum())


def fit_logreg(features, labels, cfg: LogRegConfig = LogRegConfig()) -> LogisticModel:
    """L2-regularized logistic regression by gradient descent with backtracking.

    Minimizes the summed log-loss plus ``l2/2 * |w|^2`` (intercept not
    penalized). Stops at ``max_iter`` or when the gradient norm drops below
    ``tol``.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be (n, d) and match labels")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise UnevaluableError("training data contains a single class")
    w = np.zeros(X.shape[1])
    b = 0.0
    f, gw, gb = _objective(X, y, w, b, cfg.l2)
    step = 1.0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        gnorm2 = gw @ gw + gb * gb
        if np.sqrt(gnorm2) <= cfg.tol:
            break
        step *= 2.0
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new, gw_new, gb_new = _objective(X, y, w_new, b_new, cfg.l2)
            if f_new <= f - 0.5 * step * gnorm2 or step < 1e-20:
                break
            step *= 0.5
        w, b, f, gw, gb = w_new, b_new, f_new, gw_new, gb_new
    return LogisticModel(w, float(b), it)


def f1_score(predictions, labels, threshold: float = 0.5) -> float:
    """F1 of the positive class; a prediction is positive when it exceeds ``threshold``."""
    pred = np.asarray(predictions, dtype=float) > threshold
    lab = np.asarray(labels) == 1
    tp = int(np.sum(pred & lab))
    fp = int(np.sum(pred & ~lab))
    fn = int(np.sum(~pred & lab))
    if tp == 0:
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (midranks for ties)."""
    scores = np.asarray(scores, dtype=float)
    lab = np.asarray(labels) == 1
    n_pos = int(lab.sum())
    n_neg = len(lab) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs both classes")
    ranks = midranks(scores)
    return float((ranks[lab].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class EvalRecord:
    rel: int
    run: int
    kind: str
    f1: float | None
    roc_auc: float | None
    missing_train_ratio: float
    missing_test_ratio: float
    n_train_used: int
    n_test_used: int
    n_train_total: int
    n_test_total: int
    skip_reason: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _examples(split: RelationSplit, which: str):
    pos = getattr(split, f"{which}_pos")
    neg = getattr(split, f"{which}_neg")
    triples = np.concatenate([pos, neg]).reshape(-1, 3)
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return triples, labels


def _featurize(triples, labels, table, op):
    keep = table.present[triples[:, 0]] & table.present[triples[:, 2]]
    t = triples[keep]
    X = combine(op, table.vectors[t[:, 0]], table.vectors[t[:, 2]])
    return X, labels[keep], int((~keep).sum())


def evaluate_relation(split: RelationSplit, table, op: CombineOp | str = CombineOp.CONCAT,
                      run: int = 0, kind: str = "generalized",
                      cfg: LogRegConfig = LogRegConfig()) -> EvalRecord:
    """Fit on the train examples and score the test examples of one relation.

    Examples with an endpoint lacking an embedding are dropped and counted.
    An unevaluable relation yields a record with ``skip_reason`` set.
    """
    tr, ytr = _examples(split, "train")
    te, yte = _examples(split, "test")
    Xtr, ytr_used, drop_tr = _featurize(tr, ytr, table, op)
    Xte, yte_used, drop_te = _featurize(te, yte, table, op)
    record = EvalRecord(
        rel=split.rel, run=run, kind=kind, f1=None, roc_auc=None,
        missing_train_ratio=drop_tr / len(tr) if len(tr) else 0.0,
        missing_test_ratio=drop_te / len(te) if len(te) else 0.0,
        n_train_used=len(ytr_used), n_test_used=len(yte_used),
        n_train_total=len(tr), n_test_total=len(te),
    )
    if len(yte_used) == 0:
        record.skip_reason = "no usable test examples"
        return record
    try:
        model = fit_logreg(Xtr, ytr_used, cfg)
    except UnevaluableError as exc:
        record.skip_reason = str(exc)
        return record
    proba = model.predict_proba(Xte)
    record.f1 = f1_score(proba, yte_used)
    if 0 < yte_used.sum() < len(yte_used):
        record.roc_auc = roc_auc(proba, yte_used)
    return record
