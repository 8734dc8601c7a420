"""Relation-centric connectivity and semantic-similarity descriptors."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .kg import KnowledgeGraph, encode


def mu(kg: KnowledgeGraph, rel: int) -> float:
    """Positives over the size of the domain x range candidate space."""
    n = kg.relation_size(rel)
    return n / (len(kg.domain_of(rel)) * len(kg.range_of(rel)))


def z(kg: KnowledgeGraph, rel: int) -> float:
    """Positives over all ordered pairs of distinct entities."""
    n_ent = kg.entity_count
    if n_ent < 2:
        raise ValueError("z is undefined for a graph with fewer than 2 entities")
    return kg.relation_size(rel) / (n_ent * (n_ent - 1))


def _pair_keys(kg: KnowledgeGraph, rel: int) -> np.ndarray:
    heads, tails = kg.pairs(rel)
    return np.sort(encode(heads, 0, tails, kg.entity_count, 1))


def _entity_keys(kg: KnowledgeGraph, rel: int) -> np.ndarray:
    heads, tails = kg.pairs(rel)
    return np.union1d(heads, tails)


def _jaccard_sorted(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.intersect1d(a, b, assume_unique=True).size
    union = a.size + b.size - inter
    return inter / union if union else 0.0


def jaccard_instances(kg: KnowledgeGraph, r1: int, r2: int) -> float:
    """Jaccard index of the (head, tail) pair sets of two relations."""
    return _jaccard_sorted(_pair_keys(kg, r1), _pair_keys(kg, r2))


def jaccard_entities(kg: KnowledgeGraph, r1: int, r2: int) -> float:
    """Jaccard index of the entities participating (domain or range) in two relations."""
    return _jaccard_sorted(_entity_keys(kg, r1), _entity_keys(kg, r2))


def frobenius(matrix) -> float:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return float(math.sqrt(np.sum(np.abs(m) ** 2)))


def _similarity_matrix(keys: list[np.ndarray]) -> np.ndarray:
    n = len(keys)
    out = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = _jaccard_sorted(keys[i], keys[j])
    return out


def _mean_sd(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), sd


@dataclass
class DescriptorReport:
    relations: list[str]
    n_pos: list[int]
    dom_size: list[int]
    range_size: list[int]
    mu: list[float]
    z: list[float]
    S: list[list[float]]
    S_prime: list[list[float]]
    frob_S: float
    frob_S_prime: float
    entity_count: int
    relation_count: int
    triple_count: int
    mean_mu: float
    sd_mu: float
    mean_z: float
    sd_z: float

    def summary(self) -> dict:
        """Scalar graph-level descriptors used for correlation analysis."""
        return {
            "frob_S": self.frob_S,
            "frob_S_prime": self.frob_S_prime,
            "n_triples": self.triple_count,
            "mean_mu": self.mean_mu,
            "mean_z": self.mean_z,
        }

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DescriptorReport":
        return cls(**data)

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def write_csv(self, directory) -> None:
        """Write S.csv, S_prime.csv (heatmap-ready) and relations.csv."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for name, matrix in (("S", self.S), ("S_prime", self.S_prime)):
            with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["relation", *self.relations])
                for rel, row in zip(self.relations, matrix):
                    w.writerow([rel, *(repr(float(x)) for x in row)])
        with open(out / "relations.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["relation", "n_pos", "dom", "range", "mu", "z"])
            for row in zip(self.relations, self.n_pos, self.dom_size, self.range_size, self.mu, self.z):
                w.writerow([*row[:4], repr(row[4]), repr(row[5])])


def describe(kg: KnowledgeGraph) -> DescriptorReport:
    """Compute every per-relation and graph-level descriptor.

    Relations with no triples are left out of the matrices and the means.
    """
    rels = kg.indexed_relations
    mus = [mu(kg, r) for r in rels]
    zs = [z(kg, r) for r in rels] if kg.entity_count >= 2 else [float("nan")] * len(rels)
    S = _similarity_matrix([_pair_keys(kg, r) for r in rels])
    S_prime = _similarity_matrix([_entity_keys(kg, r) for r in rels])
    mean_mu, sd_mu = _mean_sd(mus)
    mean_z, sd_z = _mean_sd(zs)
    return DescriptorReport(
        relations=[kg.relations.name(r) for r in rels],
        n_pos=[kg.relation_size(r) for r in rels],
        dom_size=[len(kg.domain_of(r)) for r in rels],
        range_size=[len(kg.range_of(r)) for r in rels],
        mu=mus,
        z=zs,
        S=S.tolist(),
        S_prime=S_prime.tolist(),
        frob_S=frobenius(S),
        frob_S_prime=frobenius(S_prime),
        entity_count=kg.entity_count,
        relation_count=kg.relation_count,
        triple_count=kg.triple_count,
        mean_mu=mean_mu,
        sd_mu=sd_mu,
        mean_z=mean_z,
        sd_z=sd_z,
    )
