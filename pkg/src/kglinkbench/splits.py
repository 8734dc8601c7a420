"""Retained graphs, closed-world negative sampling and per-relation
train/test example sets."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .kg import KnowledgeGraph, save_tsv
from .seeding import stream

log = logging.getLogger(__name__)

# Below this many candidate pairs a stalled rejection sampler switches to
# explicit enumeration.
ENUMERATION_LIMIT = 4_000_000
ABLATION_RANGE = (0.1, 0.9)


class NegativeMode(str, Enum):
    SEMANTIC = "semantic"
    UNRESTRICTED = "unrestricted"


@dataclass(frozen=True)
class SplitConfig:
    alpha: float = 0.8
    seed: int = 0
    negative_mode: NegativeMode = NegativeMode.SEMANTIC
    ratio: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.ratio < 1:
            raise ValueError("ratio must be >= 1")
        object.__setattr__(self, "negative_mode", NegativeMode(self.negative_mode))


class SkipRelation(Exception):
    """A relation cannot be split (too few positives)."""


@dataclass(frozen=True)
class SkipRecord:
    rel: int
    reason: str


def _empty() -> np.ndarray:
    return np.empty((0, 3), dtype=np.int64)


@dataclass
class RelationSplit:
    rel: int
    alpha: float
    train_pos: np.ndarray
    test_pos: np.ndarray
    train_neg: np.ndarray = field(default_factory=_empty)
    test_neg: np.ndarray = field(default_factory=_empty)
    negatives_requested: int = 0
    shortfall: bool = False


@dataclass
class RetainedGraph:
    """Training corpus: the full graph minus some removed test positives.

    The corpus is materialized on demand so that one retained graph per
    relation stays cheap for graphs with hundreds of relations.
    """

    kg: KnowledgeGraph
    removed: np.ndarray
    rel: int | None = None

    @property
    def kind(self) -> str:
        return "generalized" if self.rel is None else "specialized"

    @property
    def corpus(self) -> np.ndarray:
        if len(self.removed) == 0:
            return self.kg.triples
        kg = self.kg
        all_keys = kg.key(kg.triples[:, 0], kg.triples[:, 1], kg.triples[:, 2])
        gone = kg.key(self.removed[:, 0], self.removed[:, 1], self.removed[:, 2])
        return kg.triples[~np.isin(all_keys, gone)]

    def __len__(self) -> int:
        return self.kg.triple_count - len(self.removed)


@dataclass
class Splits:
    generalized: RetainedGraph
    relations: dict[int, tuple[RetainedGraph, RelationSplit]]
    skipped: list[SkipRecord]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def train_size(n: int, alpha: float) -> int:
    """Number of retained positives; both sides keep at least one example."""
    return min(max(round_half_up(alpha * n), 1), n - 1)


def split_positives(kg: KnowledgeGraph, rel: int, alpha: float, rng: np.random.Generator):
    """Uniform random partition of the relation's positives into train/test."""
    triples = kg.relation_triples(rel)
    n = len(triples)
    if n < 2:
        raise SkipRelation(f"relation {kg.relations.name(rel)!r} has {n} positive(s), need >= 2")
    order = rng.permutation(n)
    k = train_size(n, alpha)
    return triples[np.sort(order[:k])], triples[np.sort(order[k:])]


def _candidates(kg: KnowledgeGraph, rel: int, mode: NegativeMode):
    if mode is NegativeMode.SEMANTIC:
        return np.array(sorted(kg.domain_of(rel))), np.array(sorted(kg.range_of(rel)))
    ents = np.arange(kg.entity_count)
    return ents, ents


def _space_size(heads: np.ndarray, tails: np.ndarray, mode: NegativeMode) -> int:
    if mode is NegativeMode.UNRESTRICTED:
        return len(heads) * (len(heads) - 1)
    return len(heads) * len(tails)


def _enumerate(kg, rel, heads, tails, mode, exclude) -> np.ndarray:
    hh, tt = np.meshgrid(heads, tails, indexing="ij")
    hh, tt = hh.ravel(), tt.ravel()
    keep = np.ones(len(hh), dtype=bool)
    if mode is NegativeMode.UNRESTRICTED:
        keep &= hh != tt
    keys = kg.key(hh, rel, tt)
    keep &= ~kg.contains_many(hh, np.full_like(hh, rel), tt)
    if exclude:
        keep &= ~np.isin(keys, np.fromiter(exclude, dtype=np.int64, count=len(exclude)))
    return np.column_stack([hh[keep], np.full(keep.sum(), rel), tt[keep]])


def sample_negatives(
    kg: KnowledgeGraph,
    rel: int,
    count: int,
    mode: NegativeMode | str = NegativeMode.SEMANTIC,
    rng: np.random.Generator | None = None,
    exclude=frozenset(),
) -> tuple[np.ndarray, bool]:
    """Draw ``count`` distinct non-asserted triples for ``rel``.

    Semantic mode corrupts within dom(rel) x range(rel); unrestricted mode
    uses any ordered pair of distinct entities. ``exclude`` holds triple keys
    (``kg.key``) that must not be returned.

    Returns the triples and a shortfall flag, set when fewer than ``count``
    candidates exist.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    mode = NegativeMode(mode)
    if count == 0:
        return _empty(), False
    rng = rng if rng is not None else np.random.default_rng()
    heads, tails = _candidates(kg, rel, mode)
    space = _space_size(heads, tails, mode)
    upper = space - kg.relation_size(rel) if mode is NegativeMode.SEMANTIC else space
    if upper <= 0:
        return _empty(), True

    if space <= ENUMERATION_LIMIT and upper < 4 * count:
        return _draw_enumerated(kg, rel, heads, tails, mode, exclude, count, rng)

    chosen: dict[int, tuple[int, int]] = {}
    attempts, budget = 0, 50 * count + 1000
    while len(chosen) < count:
        if attempts > budget:
            if space <= ENUMERATION_LIMIT:
                return _draw_enumerated(kg, rel, heads, tails, mode, exclude, count, rng)
            log.warning("negative sampling for relation %d stalled after %d draws", rel, attempts)
            break
        batch = 2 * (count - len(chosen)) + 16
        hs = heads[rng.integers(len(heads), size=batch)]
        ts = tails[rng.integers(len(tails), size=batch)]
        attempts += batch
        for h, t in zip(hs.tolist(), ts.tolist()):
            if mode is NegativeMode.UNRESTRICTED and h == t:
                continue
            k = kg.key(h, rel, t)
            if k in chosen or k in exclude or kg.contains((h, rel, t)):
                continue
            chosen[k] = (h, t)
            if len(chosen) == count:
                break
    out = np.array([(h, rel, t) for h, t in chosen.values()], dtype=np.int64).reshape(-1, 3)
    return out, len(out) < count


def _draw_enumerated(kg, rel, heads, tails, mode, exclude, count, rng):
    pool = _enumerate(kg, rel, heads, tails, mode, exclude)
    if len(pool) <= count:
        return pool[rng.permutation(len(pool))], len(pool) < count
    idx = rng.choice(len(pool), size=count, replace=False)
    return pool[idx], False


def split_relation(
    kg: KnowledgeGraph,
    rel: int,
    alpha: float,
    rng: np.random.Generator,
    mode: NegativeMode = NegativeMode.SEMANTIC,
    ratio: int = 1,
    with_negatives: bool = True,
) -> RelationSplit:
    train_pos, test_pos = split_positives(kg, rel, alpha, rng)
    split = RelationSplit(rel, alpha, train_pos, test_pos)
    if not with_negatives:
        return split
    n_train = len(train_pos) * ratio
    n_test = len(test_pos) * ratio
    # drawn jointly, then partitioned: train/test negatives are disjoint
    negs, shortfall = sample_negatives(kg, rel, n_train + n_test, mode, rng)
    if shortfall:
        n_train = min(round_half_up(alpha * len(negs)), len(negs))
    split.train_neg = negs[:n_train]
    split.test_neg = negs[n_train:]
    split.negatives_requested = len(train_pos) * ratio + len(test_pos) * ratio
    split.shortfall = shortfall
    return split


def build_splits(
    kg: KnowledgeGraph,
    cfg: SplitConfig,
    alphas: Mapping[int, float] | None = None,
    with_negatives: bool = True,
) -> Splits:
    """Per-relation splits plus specialized and generalized retained graphs.

    ``alphas`` overrides ``cfg.alpha`` per relation (random ablation). Each
    relation draws from its own stream keyed by (seed, relation id).
    """
    relations: dict[int, tuple[RetainedGraph, RelationSplit]] = {}
    skipped: list[SkipRecord] = []
    removed = []
    for rel in kg.indexed_relations:
        alpha = cfg.alpha if alphas is None else alphas[rel]
        rng = stream(cfg.seed, "split", rel)
        try:
            split = split_relation(kg, rel, alpha, rng, cfg.negative_mode, cfg.ratio, with_negatives)
        except SkipRelation as exc:
            log.warning("skipping relation: %s", exc)
            skipped.append(SkipRecord(rel, str(exc)))
            continue
        relations[rel] = (RetainedGraph(kg, split.test_pos, rel), split)
        removed.append(split.test_pos)
    gone = np.concatenate(removed) if removed else _empty()
    return Splits(RetainedGraph(kg, gone), relations, skipped)


def ablation_alphas(kg: KnowledgeGraph, seed: int) -> dict[int, float]:
    """Independent per-relation retain fractions, uniform on [0.1, 0.9]."""
    rng = stream(seed, "ablation")
    lo, hi = ABLATION_RANGE
    draws = rng.uniform(lo, hi, size=kg.relation_count)
    return {r: float(draws[r]) for r in range(kg.relation_count)}


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)[:80]


def write_splits(splits: Splits, directory) -> None:
    """Dump corpus.tsv and per-relation example files for auditing."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    kg = splits.generalized.kg
    save_tsv(kg, out / "corpus.tsv", splits.generalized.corpus)
    for rel, (_, split) in splits.relations.items():
        d = out / "relations" / f"{rel:04d}_{_safe(kg.relations.name(rel))}"
        d.mkdir(parents=True, exist_ok=True)
        for part in ("train_pos", "test_pos", "train_neg", "test_neg"):
            save_tsv(kg, d / f"{part}.tsv", getattr(split, part))
