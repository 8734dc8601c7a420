import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kglinkbench.descriptors import (DescriptorReport, describe, frobenius, jaccard_entities,
                                     jaccard_instances, mu, z)

from conftest import kg_from, random_kg
from oracles import descriptor_mismatches


def rel(kg, name):
    return kg.relations.id(name)


def test_mu_single_pair():
    kg = kg_from(["a r b"])
    assert mu(kg, rel(kg, "r")) == 1.0


def test_mu_toy(toy):
    assert mu(toy, rel(toy, "r1")) == 0.75


def test_mu_complete_bipartite():
    kg = kg_from([f"{h} r {t}" for h in "ab" for t in "xyz"])
    assert mu(kg, rel(kg, "r")) == 1.0


def test_z_four_entities(toy):
    assert z(toy, rel(toy, "r1")) == 0.25


def test_z_two_entities():
    kg = kg_from(["a r b"])
    assert z(kg, rel(kg, "r")) == 0.5


def test_z_unindexed_relation_is_zero():
    from kglinkbench.kg import KnowledgeGraph, Interner

    ents, rels = Interner(), Interner()
    for n in "ab":
        ents.add(n)
    rels.add("r")
    rels.add("empty")
    kg = KnowledgeGraph.from_ids(ents, rels, [(0, 0, 1)])
    assert z(kg, 1) == 0.0


def test_z_can_exceed_one_with_self_loops():
    # the denominator excludes reflexive pairs, the numerator does not
    kg = kg_from(["a r a", "a r b", "b r a"])
    assert z(kg, 0) == 1.5


def test_jaccard_instances(toy):
    r1, r2 = rel(toy, "r1"), rel(toy, "r2")
    assert jaccard_instances(toy, r1, r1) == 1.0
    assert jaccard_instances(toy, r1, r2) == 0.25


def test_jaccard_disjoint():
    kg = kg_from(["a r b", "c s d"])
    assert jaccard_instances(kg, 0, 1) == 0.0
    assert jaccard_entities(kg, 0, 1) == 0.0


def test_jaccard_entities(toy):
    r1, r2 = rel(toy, "r1"), rel(toy, "r2")
    assert jaccard_entities(toy, r1, r1) == 1.0
    assert jaccard_entities(toy, r1, r2) == 0.75


def test_frobenius():
    assert frobenius(np.eye(2)) == pytest.approx(math.sqrt(2))
    assert frobenius([[1, 0.25], [0.25, 1]]) == pytest.approx(1.45774, abs=1e-5)
    assert frobenius(np.zeros((3, 3))) == 0.0
    with pytest.raises(ValueError):
        frobenius(np.zeros((2, 3)))


def test_describe_toy(toy):
    rep = describe(toy)
    # r2: dom {a,c}, range {b,d}, 2 pairs
    assert rep.mean_mu == pytest.approx((0.75 + 0.5) / 2)
    assert rep.S == [[1.0, 0.25], [0.25, 1.0]]
    assert rep.S_prime == [[1.0, 0.75], [0.75, 1.0]]
    assert rep.frob_S == pytest.approx(math.sqrt(2.125))


def test_report_round_trip(toy, tmp_path):
    rep = describe(toy)
    rep.write_json(tmp_path / "d.json")
    again = DescriptorReport.from_dict(json.loads((tmp_path / "d.json").read_text()))
    assert again == rep
    rep.write_csv(tmp_path / "csv")
    lines = (tmp_path / "csv" / "S.csv").read_text().splitlines()
    assert lines[0] == "relation,r1,r2"
    assert lines[1].startswith("r1,1.0,0.25")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_brute_force(seed):
    kg = random_kg(np.random.default_rng(seed))
    assert descriptor_mismatches(kg, describe(kg)) == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_invariants(seed):
    kg = random_kg(np.random.default_rng(seed))
    rep = describe(kg)
    S, Sp = np.array(rep.S), np.array(rep.S_prime)
    assert all(0 < m <= 1 for m in rep.mu)
    loop_free = not np.any(kg.triples[:, 0] == kg.triples[:, 2])
    if loop_free and kg.entity_count >= 2:
        assert all(0 < v <= 1 for v in rep.z)
    for M in (S, Sp):
        assert np.array_equal(M, M.T)
        assert np.all(np.diag(M) == 1.0)
        assert np.all((M >= 0) & (M <= 1))
    # shared pairs imply shared entities
    assert np.all(Sp[S > 0] > 0)
    k = len(rep.relations)
    assert math.sqrt(k) - 1e-12 <= rep.frob_S <= k + 1e-12


def test_umls_mean_mu(umls):
    assert describe(umls).mean_mu == pytest.approx(0.60, abs=0.05)
