"""In-memory knowledge graph: string interning, triple membership and
per-relation indices."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

CONVE_SPLITS = ("train.txt", "valid.txt", "test.txt")


class KGFormatError(ValueError):
    """Raised for malformed or empty triple files."""


class Triple(NamedTuple):
    head: int
    rel: int
    tail: int


class Interner:
    """Bidirectional string <-> dense id map, ids assigned in first-seen order."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        return self._ids[name]

    def name(self, idx: int) -> str:
        return self._names[idx]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Immutable set of (head, relation, tail) id triples.

    ``triples`` is an ``(n, 3)`` int64 array without duplicates, sorted by
    relation, then head, then tail. Arrays are marked read-only.
    """

    entities: Interner
    relations: Interner
    triples: np.ndarray
    _keys: frozenset = field(repr=False)
    _by_relation: dict = field(repr=False)
    _dom_cache: dict = field(default_factory=dict, repr=False)
    _range_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_ids(cls, entities: Interner, relations: Interner, triples) -> "KnowledgeGraph":
        arr = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if arr.size:
            if arr[:, [0, 2]].min() < 0 or arr[:, [0, 2]].max() >= len(entities):
                raise ValueError("entity id out of range")
            if arr[:, 1].min() < 0 or arr[:, 1].max() >= len(relations):
                raise ValueError("relation id out of range")
        arr = np.unique(arr, axis=0)
        arr = arr[np.lexsort((arr[:, 2], arr[:, 0], arr[:, 1]))]
        arr.setflags(write=False)
        n_ent, n_rel = len(entities), len(relations)
        keys = frozenset(encode(arr[:, 0], arr[:, 1], arr[:, 2], n_ent, n_rel).tolist())
        by_relation = {}
        if len(arr):
            bounds = np.flatnonzero(np.diff(arr[:, 1])) + 1
            for chunk in np.split(arr, bounds):
                heads = chunk[:, 0].copy()
                tails = chunk[:, 2].copy()
                heads.setflags(write=False)
                tails.setflags(write=False)
                by_relation[int(chunk[0, 1])] = (heads, tails)
        return cls(entities, relations, arr, keys, by_relation)

    @property
    def entity_count(self) -> int:
        return len(self.entities)

    @property
    def relation_count(self) -> int:
        return len(self.relations)

    @property
    def triple_count(self) -> int:
        return len(self.triples)

    def __len__(self) -> int:
        return len(self.triples)

    def key(self, head: int, rel: int, tail: int) -> int:
        return (head * self.relation_count + rel) * self.entity_count + tail

    def contains(self, t: Sequence[int]) -> bool:
        h, r, tl = t
        return self.key(h, r, tl) in self._keys

    __contains__ = contains

    def contains_many(self, heads, rels, tails) -> np.ndarray:
        keys = encode(heads, rels, tails, self.entity_count, self.relation_count)
        return np.fromiter((k in self._keys for k in keys.tolist()), dtype=bool, count=len(keys))

    @property
    def indexed_relations(self) -> list[int]:
        """Relation ids with at least one triple, ascending."""
        return sorted(self._by_relation)

    def pairs(self, rel: int) -> tuple[np.ndarray, np.ndarray]:
        """(heads, tails) arrays of the triples of ``rel``."""
        if rel not in self._by_relation:
            if 0 <= rel < self.relation_count:
                empty = np.empty(0, dtype=np.int64)
                return empty, empty
            raise KeyError(f"unknown relation id {rel}")
        return self._by_relation[rel]

    def relation_size(self, rel: int) -> int:
        return len(self.pairs(rel)[0])

    def relation_triples(self, rel: int) -> np.ndarray:
        heads, tails = self.pairs(rel)
        return np.column_stack([heads, np.full_like(heads, rel), tails])

    def domain_of(self, rel: int) -> frozenset[int]:
        if rel not in self._dom_cache:
            self._require_indexed(rel)
            self._dom_cache[rel] = frozenset(self._by_relation[rel][0].tolist())
        return self._dom_cache[rel]

    def range_of(self, rel: int) -> frozenset[int]:
        if rel not in self._range_cache:
            self._require_indexed(rel)
            self._range_cache[rel] = frozenset(self._by_relation[rel][1].tolist())
        return self._range_cache[rel]

    def _require_indexed(self, rel: int) -> None:
        if rel not in self._by_relation:
            raise KeyError(f"relation {rel} has no triples")

    def subgraph(self, triples) -> "KnowledgeGraph":
        """KG over a subset of triples, sharing this graph's interners."""
        return KnowledgeGraph.from_ids(self.entities, self.relations, triples)

    def entity_names(self, ids) -> list[str]:
        return [self.entities.name(int(i)) for i in ids]

    def to_lines(self, triples=None) -> list[str]:
        arr = self.triples if triples is None else np.asarray(triples).reshape(-1, 3)
        ent, rel = self.entities.name, self.relations.name
        return [f"{ent(h)}\t{rel(r)}\t{ent(t)}" for h, r, t in arr.tolist()]


def encode(heads, rels, tails, n_ent: int, n_rel: int) -> np.ndarray:
    heads = np.asarray(heads, dtype=np.int64)
    rels = np.asarray(rels, dtype=np.int64)
    tails = np.asarray(tails, dtype=np.int64)
    return (heads * n_rel + rels) * n_ent + tails


def resolve_paths(paths: str | os.PathLike | Sequence[str | os.PathLike]) -> list[Path]:
    """Expand a ConvE-style directory into its split files."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            found = [p / name for name in CONVE_SPLITS if (p / name).is_file()]
            if not found:
                raise KGFormatError(f"{p}: no train.txt/valid.txt/test.txt found")
            out.extend(found)
        elif p.is_file():
            out.append(p)
        else:
            raise FileNotFoundError(p)
    return out


def parse_lines(lines: Iterable[str], source: str = "<input>"):
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise KGFormatError(
                f"{source}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        yield fields


def from_string_triples(rows: Iterable[Sequence[str]]) -> KnowledgeGraph:
    entities, relations = Interner(), Interner()
    ids = []
    for h, r, t in rows:
        ids.append((entities.add(h), relations.add(r), entities.add(t)))
    if not ids:
        raise KGFormatError("empty corpus")
    return KnowledgeGraph.from_ids(entities, relations, ids)


def load_tsv(paths) -> KnowledgeGraph:
    """Load and merge one or more head<TAB>relation<TAB>tail files.

    A directory argument is expanded to the ConvE layout (train, valid, test);
    all files are merged into a single positive set.
    """
    rows = []
    for path in resolve_paths(paths):
        with open(path, encoding="utf-8") as fh:
            rows.extend(parse_lines(fh, str(path)))
    return from_string_triples(rows)


def save_tsv(kg: KnowledgeGraph, path, triples=None) -> None:
    lines = kg.to_lines(triples)
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(line + "\n" for line in lines)


def stats(kg: KnowledgeGraph) -> dict:
    return {
        "entities": kg.entity_count,
        "relations": kg.relation_count,
        "triples": kg.triple_count,
    }
