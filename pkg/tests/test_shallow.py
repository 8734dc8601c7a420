import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kglinkbench.shallow import (EmbeddingTable, ShallowConfig, init_vectors, load_table,
                                 similarity, softmax_loss, train_shallow)

from conftest import kg_from
from oracles import central_difference, rel_err, shallow_grad_error


def test_similarity_examples():
    assert similarity([1, 0], [0, 1]) == 0
    assert similarity([1, 2], [3, 4]) == 11
    with pytest.raises(ValueError):
        similarity([1, 2], [1, 2, 3])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8))
def test_self_similarity_nonnegative(u):
    assert similarity(u, u) >= 0


def test_loss_uniform_scores():
    assert softmax_loss(0.3, [0.3])[0] == pytest.approx(math.log(2))
    for k in (1, 5, 10):
        assert softmax_loss(1.0, [1.0] * k)[0] == pytest.approx(math.log(k + 1))


def test_loss_saturates():
    loss, _ = softmax_loss(20.0, [0.0])
    assert 0 <= loss < 1e-8


def test_loss_stable_for_large_scores():
    loss, grad = softmax_loss(1e4, [1e4 + 1])
    assert math.isfinite(loss) and np.all(np.isfinite(grad))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_loss_gradient_finite_difference(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(scale=3, size=int(rng.integers(2, 12)))
    _, grad = softmax_loss(s[0], s[1:])
    numeric = central_difference(lambda x: softmax_loss(x[0], x[1:])[0], s)
    assert rel_err(grad, numeric) < 1e-5


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 5))
def test_loss_monotone(seed, delta):
    rng = np.random.default_rng(seed)
    pos, negs = rng.normal(), rng.normal(size=4)
    base = softmax_loss(pos, negs)[0]
    assert softmax_loss(pos + delta, negs)[0] <= base
    bumped = negs.copy()
    bumped[int(rng.integers(4))] += delta
    assert softmax_loss(pos, bumped)[0] >= base


@pytest.mark.parametrize("cosine", [False, True])
def test_kernel_step_matches_numeric_gradient(cosine):
    rng = np.random.default_rng(5)
    for _ in range(20):
        assert shallow_grad_error(rng, cosine) < 1e-4


def test_init_range():
    v = init_vectors(100, 50, np.random.default_rng(0))
    assert np.all(np.abs(v) <= 1 / 100)


def test_single_triple_similarity_grows():
    kg = kg_from(["a r b", "c s d"])
    corpus = kg.relation_triples(kg.relations.id("r"))
    cfg = ShallowConfig(dim=8, epochs=50, seed=2)
    table = train_shallow(corpus, kg, cfg)
    from kglinkbench.seeding import stream

    start = init_vectors(kg.entity_count, cfg.dim, stream(cfg.seed, "shallow"))
    a, b = kg.entities.id("a"), kg.entities.id("b")
    assert similarity(table.get(a), table.get(b)) > similarity(start[a], start[b])


def test_absent_entities_flagged():
    kg = kg_from(["a r b", "c s d"])
    table = train_shallow(kg.relation_triples(0), kg, ShallowConfig(dim=4, epochs=2))
    assert table.present.tolist() == [True, True, False, False]
    with pytest.raises(KeyError):
        table.get(kg.entities.id("c"))
    assert np.isnan(table.vectors[2]).all()


def test_sequential_training_is_bitwise_reproducible(toy):
    cfg = ShallowConfig(dim=6, epochs=5, seed=4)
    a = train_shallow(toy.triples, toy, cfg)
    b = train_shallow(toy.triples, toy, cfg)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    c = train_shallow(toy.triples, toy, ShallowConfig(dim=6, epochs=5, seed=5))
    assert a.vectors.tobytes() != c.vectors.tobytes()


def test_parallel_mode_trains(toy):
    table = train_shallow(toy.triples, toy, ShallowConfig(dim=6, epochs=3, parallel=True),
                          deterministic=False)
    assert np.all(np.isfinite(table.vectors[table.present]))


def test_deterministic_flag_forces_sequential(toy):
    seq = train_shallow(toy.triples, toy, ShallowConfig(dim=6, epochs=3))
    par = train_shallow(toy.triples, toy, ShallowConfig(dim=6, epochs=3, parallel=True),
                        deterministic=True)
    assert seq.vectors.tobytes() == par.vectors.tobytes()


@pytest.mark.parametrize("seed", range(5))
def test_two_cliques_separate(seed):
    left = [f"l{i}" for i in range(6)]
    right = [f"q{i}" for i in range(6)]
    rows = [f"{x} r {y}" for group in (left, right) for x in group for y in group if x != y]
    kg = kg_from(rows)
    table = train_shallow(kg.triples, kg, ShallowConfig(dim=16, epochs=20, seed=seed))
    L = [kg.entities.id(x) for x in left]
    R = [kg.entities.id(x) for x in right]
    V = table.vectors
    intra = np.mean([V[i] @ V[j] for g in (L, R) for i in g for j in g if i != j])
    inter = np.mean([V[i] @ V[j] for i in L for j in R])
    assert intra > inter


def test_config_validation():
    with pytest.raises(ValueError):
        ShallowConfig(dim=0)
    with pytest.raises(ValueError):
        ShallowConfig(similarity="euclid")


def test_empty_corpus_rejected(toy):
    with pytest.raises(ValueError):
        train_shallow(np.empty((0, 3), dtype=np.int64), toy)


def test_tsv_round_trip(toy, tmp_path):
    table = train_shallow(toy.relation_triples(0), toy, ShallowConfig(dim=3, epochs=2))
    table.write_tsv(tmp_path / "emb.tsv")
    assert (tmp_path / "emb.tsv").read_text().splitlines()[0] == "dim\t3"
    again = load_table(tmp_path / "emb.tsv", toy)
    assert np.array_equal(again.present, table.present)
    p = table.present
    assert np.array_equal(again.vectors[p], table.vectors[p])


def test_tsv_header_required(tmp_path):
    (tmp_path / "bad.tsv").write_text("a\t1.0\n")
    with pytest.raises(ValueError):
        EmbeddingTable.read_tsv(tmp_path / "bad.tsv", ["a"])
