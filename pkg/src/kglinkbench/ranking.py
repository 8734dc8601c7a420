"""Mean rank / mean reciprocal rank over head and tail replacement queries."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .kg import KnowledgeGraph

MODES = ("raw", "filtered")
SIDES = ("head", "tail")


@dataclass
class RankResult:
    mr: float
    mrr: float
    n_queries: int
    mode: str
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class FilterIndex:
    """Known answers per (head, relation) and (relation, tail)."""

    def __init__(self, kg: KnowledgeGraph):
        tails, heads = defaultdict(list), defaultdict(list)
        for h, r, t in kg.triples.tolist():
            tails[h, r].append(t)
            heads[r, t].append(h)
        self._tails = {k: np.array(v) for k, v in tails.items()}
        self._heads = {k: np.array(v) for k, v in heads.items()}
        self._empty = np.empty(0, dtype=np.int64)

    def known(self, h: int, r: int, t: int, side: str) -> np.ndarray:
        if side == "tail":
            return self._tails.get((h, r), self._empty)
        return self._heads.get((r, t), self._empty)


def rank_from_scores(scores: np.ndarray, true_idx: int, removed=()) -> int:
    """Rank of ``true_idx``: 1 + #strictly higher + ceil(#tied / 2).

    ``removed`` lists candidates excluded from the comparison (the true
    candidate itself is never removed).
    """
    scores = np.asarray(scores, dtype=float)
    keep = np.ones(len(scores), dtype=bool)
    keep[np.asarray(removed, dtype=np.int64)] = False
    keep[true_idx] = False
    target = scores[true_idx]
    others = scores[keep]
    higher = int(np.count_nonzero(others > target))
    tied = int(np.count_nonzero(others == target))
    return 1 + higher + (tied + 1) // 2


def _in_vocab(model, triple) -> bool:
    h, r, t = (int(x) for x in triple)
    n_ent, n_rel = model.n_entities, model.n_relations
    return 0 <= h < n_ent and 0 <= t < n_ent and 0 <= r < n_rel


def rank_triple(model, kg: KnowledgeGraph, triple, side: str, mode: str = "filtered",
                index: FilterIndex | None = None) -> int:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not _in_vocab(model, triple):
        raise KeyError(f"triple {tuple(triple)} outside model vocabulary")
    h, r, t = (int(x) for x in triple)
    scores = model.score_all([h], [r], [t], side)[0]
    true_idx = t if side == "tail" else h
    removed = ()
    if mode == "filtered":
        index = index or FilterIndex(kg)
        removed = index.known(h, r, t, side)
    return rank_from_scores(scores, true_idx, removed)


def query_ranks(model, kg: KnowledgeGraph, test_triples, mode: str = "filtered",
                index: FilterIndex | None = None, batch: int = 256):
    """Ranks of every in-vocabulary test triple for both sides, and the skip count."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    test = np.asarray(test_triples, dtype=np.int64).reshape(-1, 3)
    ok = np.array([_in_vocab(model, tr) for tr in test], dtype=bool)
    skipped = int((~ok).sum()) * 2
    test = test[ok]
    if mode == "filtered":
        index = index or FilterIndex(kg)
    ranks = []
    for start in range(0, len(test), batch):
        chunk = test[start:start + batch]
        for side in SIDES:
            scores = model.score_all(chunk[:, 0], chunk[:, 1], chunk[:, 2], side)
            col = 2 if side == "tail" else 0
            true_scores = scores[np.arange(len(chunk)), chunk[:, col]]
            if mode == "filtered":
                scores = scores.copy()
                for q, (h, r, t) in enumerate(chunk.tolist()):
                    known = index.known(h, r, t, side)
                    scores[q, known] = -np.inf
                    scores[q, chunk[q, col]] = true_scores[q]
            higher = np.count_nonzero(scores > true_scores[:, None], axis=1)
            tied = np.count_nonzero(scores == true_scores[:, None], axis=1) - 1
            ranks.append(1 + higher + (tied + 1) // 2)
    ranks = np.concatenate(ranks) if ranks else np.empty(0, dtype=np.int64)
    return ranks, skipped


def summarize_ranks(ranks, mode: str, skipped: int = 0) -> RankResult:
    ranks = np.asarray(ranks, dtype=float)
    if ranks.size == 0:
        raise ValueError("no rankable queries")
    return RankResult(float(ranks.mean()), float(np.mean(1.0 / ranks)), int(ranks.size),
                      mode, skipped)


def evaluate_ranking(model, test_triples, kg: KnowledgeGraph, mode: str = "filtered",
                     index: FilterIndex | None = None) -> RankResult:
    """MR and MRR over head- and tail-replacement queries of ``test_triples``."""
    ranks, skipped = query_ranks(model, kg, test_triples, mode, index)
    return summarize_ranks(ranks, mode, skipped)
