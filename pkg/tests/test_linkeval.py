import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kglinkbench.linkeval import (CombineOp, LogRegConfig, UnevaluableError, combine,
                                  evaluate_relation, f1_score, fit_logreg, roc_auc)
from kglinkbench.shallow import EmbeddingTable
from kglinkbench.splits import RelationSplit


def test_combine_examples():
    assert combine("concat", [1, 2], [3, 4]).tolist() == [1, 2, 3, 4]
    assert combine("sum", [1, 2], [3, 4]).tolist() == [4, 6]
    assert combine("mean", [1, 2], [3, 4]).tolist() == [2, 3]
    assert combine(CombineOp.HADAMARD, [1, 2], [3, 4]).tolist() == [3, 8]


def test_combine_rowwise_and_mismatch():
    u, v = np.ones((3, 2)), np.zeros((3, 2))
    assert combine("concat", u, v).shape == (3, 4)
    with pytest.raises(ValueError):
        combine("sum", [1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        combine("outer", [1], [1])


def test_separable_1d():
    X, y = np.array([[-1.0], [1.0]]), np.array([0, 1])
    m = fit_logreg(X, y)
    assert np.array_equal(m.predict_proba(X) > 0.5, y == 1)
    assert m.weights[0] > 0


def test_flipped_labels_flip_weight_sign():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    y = (X @ [1.0, -2.0, 0.5] + 0.3 * rng.normal(size=60) > 0).astype(int)
    w = fit_logreg(X, y).weights
    w_flip = fit_logreg(X, 1 - y).weights
    assert np.all(np.sign(w) == -np.sign(w_flip))
    assert np.allclose(w, -w_flip, atol=1e-4)


def test_heavy_penalty_shrinks_to_half():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 4))
    y = np.tile([0, 1], 20)
    m = fit_logreg(X, y, LogRegConfig(l2=1e6))
    assert np.abs(m.weights).max() < 1e-3
    assert np.allclose(m.predict_proba(X), 0.5, atol=1e-3)


def test_single_class_is_unevaluable():
    with pytest.raises(UnevaluableError):
        fit_logreg(np.ones((3, 2)), [1, 1, 1])


@pytest.mark.parametrize("seed", range(5))
def test_matches_sklearn(seed):
    sklearn = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 5))
    y = (X @ rng.normal(size=5) + rng.normal(size=80) > 0).astype(int)
    ours = fit_logreg(X, y, LogRegConfig(max_iter=5000, tol=1e-10))
    ref = sklearn.LogisticRegression(C=1.0, tol=1e-12, max_iter=10_000).fit(X, y)
    assert np.allclose(ours.weights, ref.coef_[0], atol=1e-5)
    assert ours.bias == pytest.approx(ref.intercept_[0], abs=1e-5)


def test_f1_examples():
    assert f1_score([0.9, 0.1], [1, 0]) == 1.0
    # TP=1, FP=1, FN=1
    assert f1_score([0.9, 0.8, 0.2, 0.1], [1, 0, 1, 0]) == pytest.approx(0.5)
    assert f1_score([0.5], [1]) == 0.0  # threshold is exclusive
    assert f1_score([0.1, 0.2], [1, 0]) == 0.0


def test_auc_examples():
    assert roc_auc([0.9, 0.1], [1, 0]) == 1.0
    assert roc_auc([0.1, 0.9], [1, 0]) == 0.0
    assert roc_auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_auc_matches_pair_counting(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    s = rng.integers(0, 5, size=n).astype(float)
    y = rng.integers(2, size=n)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    pos, neg = s[y == 1], s[y == 0]
    expected = np.mean([(p > q) + 0.5 * (p == q) for p in pos for q in neg])
    assert roc_auc(s, y) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_ranges(seed):
    rng = np.random.default_rng(seed)
    p, y = rng.random(30), rng.integers(2, size=30)
    y[:2] = [0, 1]
    assert 0 <= f1_score(p, y) <= 1
    assert 0 <= roc_auc(p, y) <= 1


def split_of(train_pos, test_pos, train_neg, test_neg):
    arr = lambda rows: np.array(rows, dtype=np.int64).reshape(-1, 3)
    return RelationSplit(0, 0.5, arr(train_pos), arr(test_pos), arr(train_neg), arr(test_neg))


def table_of(vectors, present):
    return EmbeddingTable(np.array(vectors, dtype=float), np.array(present))


def test_all_present_no_missing():
    split = split_of([(0, 0, 1)], [(2, 0, 3)], [(1, 0, 0)], [(3, 0, 2)])
    table = table_of([[1.0], [2.0], [1.5], [2.5]], [True] * 4)
    rec = evaluate_relation(split, table)
    assert rec.missing_train_ratio == rec.missing_test_ratio == 0.0
    assert rec.skip_reason is None and rec.f1 is not None


def test_missing_test_ratio_half():
    split = split_of([(0, 0, 1)], [(2, 0, 3)], [(1, 0, 0)], [(2, 0, 4)])
    table = table_of([[1.0], [2.0], [1.5], [2.5], [0.0]], [True, True, True, True, False])
    rec = evaluate_relation(split, table)
    assert rec.missing_test_ratio == 0.5
    assert rec.n_test_used == 1 and rec.n_test_total == 2
    # a single-class test set still yields F1 but no AUC
    assert rec.f1 is not None and rec.roc_auc is None


def test_no_usable_test_examples():
    split = split_of([(0, 0, 1)], [(2, 0, 3)], [(1, 0, 0)], [(3, 0, 2)])
    table = table_of([[1.0], [2.0], [0.0], [0.0]], [True, True, False, False])
    rec = evaluate_relation(split, table)
    assert rec.skip_reason == "no usable test examples"
    assert rec.missing_test_ratio == 1.0


def test_single_class_train_skipped():
    split = split_of([(0, 0, 1)], [(2, 0, 3)], [], [(3, 0, 2)])
    table = table_of([[1.0], [2.0], [1.5], [2.5]], [True] * 4)
    rec = evaluate_relation(split, table)
    assert rec.skip_reason and rec.f1 is None


def test_null_model_f1_near_half():
    rng = np.random.default_rng(0)
    n_ent, d = 2000, 8
    table = table_of(rng.normal(size=(n_ent, d)), [True] * n_ent)
    pairs = rng.integers(n_ent, size=(4000, 2))
    trip = np.column_stack([pairs[:, 0], np.zeros(4000, dtype=int), pairs[:, 1]])
    split = split_of(trip[:1000], trip[1000:2000], trip[2000:3000], trip[3000:])
    rec = evaluate_relation(split, table, "concat")
    assert rec.f1 == pytest.approx(0.5, abs=0.1)
    assert rec.roc_auc == pytest.approx(0.5, abs=0.1)
