"""Shallow entity-only embedding model trained with a sampled softmax.

For every positive (e_i, _, e_j) the pair score sim(e_i, e_j) is contrasted
against sim(e_i, e_m) for k entities drawn uniformly from the corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .kg import KnowledgeGraph
from .seeding import stream


@dataclass(frozen=True)
class ShallowConfig:
    dim: int = 50
    epochs: int = 10
    negatives_k: int = 10
    learning_rate: float = 0.05
    seed: int = 0
    similarity: str = "dot"
    parallel: bool = False

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 1 or self.negatives_k < 1:
            raise ValueError("dim, epochs and negatives_k must all be >= 1")
        if self.similarity not in ("dot", "cosine"):
            raise ValueError(f"unknown similarity {self.similarity!r}")


class EmbeddingTable:
    """Entity vectors with presence flags.

    Rows of absent entities are NaN; look them up through :meth:`get`.
    """

    def __init__(self, vectors: np.ndarray, present: np.ndarray, names=None):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.present = np.asarray(present, dtype=bool)
        self.names = names
        if self.vectors.shape[0] != self.present.shape[0]:
            raise ValueError("vectors and present must have the same length")
        self.vectors[~self.present] = np.nan

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.present)

    def get(self, entity: int) -> np.ndarray:
        if not self.present[entity]:
            raise KeyError(f"entity {entity} has no embedding")
        return self.vectors[entity]

    def write_tsv(self, path) -> None:
        if self.names is None:
            raise ValueError("entity names are required for serialization")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"dim\t{self.dim}\n")
            for e in np.flatnonzero(self.present):
                values = "\t".join(repr(float(x)) for x in self.vectors[e])
                fh.write(f"{self.names[e]}\t{values}\n")

    @classmethod
    def read_tsv(cls, path, entity_names) -> "EmbeddingTable":
        """Read a table written by :meth:`write_tsv`, aligned to ``entity_names``."""
        index = {name: i for i, name in enumerate(entity_names)}
        with open(path, encoding="utf-8") as fh:
            head = fh.readline().rstrip("\n").split("\t")
            if len(head) != 2 or head[0] != "dim":
                raise ValueError(f"{path}: missing 'dim' header")
            dim = int(head[1])
            vectors = np.zeros((len(index), dim))
            present = np.zeros(len(index), dtype=bool)
            for lineno, line in enumerate(fh, start=2):
                fields = line.rstrip("\n").split("\t")
                if len(fields) != dim + 1:
                    raise ValueError(f"{path}:{lineno}: expected {dim + 1} fields")
                e = index[fields[0]]
                vectors[e] = [float(x) for x in fields[1:]]
                present[e] = True
        return cls(vectors, present, list(entity_names))


def similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v))


def softmax_loss(pos_sim: float, neg_sims) -> tuple[float, np.ndarray]:
    """Negative log-probability of the positive among [pos, *negs].

    Returns the loss and its gradient with respect to ``[pos_sim, *neg_sims]``.
    """
    s = np.concatenate([[pos_sim], np.asarray(neg_sims, dtype=float).ravel()])
    if s.size < 2:
        raise ValueError("at least one negative is required")
    shifted = s - s.max()
    log_z = math.log(np.exp(shifted).sum())
    p = np.exp(shifted - log_z)
    grad = p.copy()
    grad[0] -= 1.0
    return float(log_z - shifted[0]), grad


@numba.njit(cache=True, nogil=True, inline="always")
def _dot(a, b):
    acc = 0.0
    for c in range(a.shape[0]):
        acc += a[c] * b[c]
    return acc


@numba.njit(cache=True, nogil=True)
def _example_step(emb, i, j, negs, lr, cosine, idx, u, vs, s, nv, gu):
    k = negs.shape[0]
    d = emb.shape[1]
    idx[0] = j
    for m in range(k):
        idx[m + 1] = negs[m]
    for c in range(d):
        u[c] = emb[i, c]
    for m in range(k + 1):
        for c in range(d):
            vs[m, c] = emb[idx[m], c]
    nu = 1.0
    nv[:] = 1.0
    if cosine:
        nu = max(np.sqrt(_dot(u, u)), 1e-12)
        for m in range(k + 1):
            nv[m] = max(np.sqrt(_dot(vs[m], vs[m])), 1e-12)
    for m in range(k + 1):
        s[m] = _dot(u, vs[m]) / (nu * nv[m])
    top = s.max()
    z = 0.0
    for m in range(k + 1):
        s[m] = np.exp(s[m] - top)
        z += s[m]
    # s now holds dloss/dsim; gradients use pre-step values only
    for m in range(k + 1):
        s[m] /= z
    s[0] -= 1.0
    gu[:] = 0.0
    for m in range(k + 1):
        g = s[m]
        e = idx[m]
        if cosine:
            scale = nu * nv[m]
            cos = _dot(u, vs[m]) / scale
            for c in range(d):
                gu[c] += g * (vs[m, c] / scale - cos * u[c] / (nu * nu))
                emb[e, c] -= lr * g * (u[c] / scale - cos * vs[m, c] / (nv[m] * nv[m]))
        else:
            step = lr * g
            for c in range(d):
                emb[e, c] -= step * u[c]
                gu[c] += g * vs[m, c]
    for c in range(d):
        emb[i, c] -= lr * gu[c]


@numba.njit(cache=True, nogil=True)
def _workspace(k, d):
    return (np.empty(k + 1, dtype=np.int64), np.empty(d), np.empty((k + 1, d)),
            np.empty(k + 1), np.empty(k + 1), np.empty(d))


@numba.njit(cache=True, nogil=True)
def _epoch_sequential(emb, heads, tails, order, negs, lr, cosine):
    idx, u, vs, s, nv, gu = _workspace(negs.shape[1], emb.shape[1])
    for n in range(order.shape[0]):
        x = order[n]
        _example_step(emb, heads[x], tails[x], negs[n], lr, cosine, idx, u, vs, s, nv, gu)


@numba.njit(cache=True, nogil=True, parallel=True)
def _epoch_hogwild(emb, heads, tails, order, negs, lr, cosine):
    for n in numba.prange(order.shape[0]):
        x = order[n]
        idx, u, vs, s, nv, gu = _workspace(negs.shape[1], emb.shape[1])
        _example_step(emb, heads[x], tails[x], negs[n], lr, cosine, idx, u, vs, s, nv, gu)


def init_vectors(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    bound = 1.0 / (2 * dim)
    return rng.uniform(-bound, bound, size=(n, dim))


def train_shallow(corpus, kg: KnowledgeGraph, cfg: ShallowConfig = ShallowConfig(),
                  deterministic: bool = True) -> EmbeddingTable:
    """Train entity embeddings on ``corpus`` (an ``(n, 3)`` triple array).

    Sequential mode is bitwise reproducible for a given seed; ``cfg.parallel``
    enables racy lock-free updates unless ``deterministic`` is set.
    """
    corpus = np.asarray(corpus, dtype=np.int64).reshape(-1, 3)
    if len(corpus) == 0:
        raise ValueError("empty training corpus")
    rng = stream(cfg.seed, "shallow")
    emb = init_vectors(kg.entity_count, cfg.dim, rng)
    present = np.zeros(kg.entity_count, dtype=bool)
    present[corpus[:, 0]] = True
    present[corpus[:, 2]] = True
    pool = np.flatnonzero(present)
    heads = np.ascontiguousarray(corpus[:, 0])
    tails = np.ascontiguousarray(corpus[:, 2])
    epoch = _epoch_hogwild if cfg.parallel and not deterministic else _epoch_sequential
    cosine = cfg.similarity == "cosine"
    for _ in range(cfg.epochs):
        order = rng.permutation(len(corpus))
        negs = pool[rng.integers(len(pool), size=(len(corpus), cfg.negatives_k))]
        epoch(emb, heads, tails, order, negs, cfg.learning_rate, cosine)
    return EmbeddingTable(emb, present, list(kg.entities.names))


def example_loss(emb: np.ndarray, i: int, j: int, negs, cosine: bool = False) -> float:
    """Loss of one training example as a function of the embedding matrix.

    Reference for gradient checks of the training kernel.
    """
    def sim(a, b):
        if cosine:
            return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
        return float(np.dot(a, b))

    u = emb[i]
    return softmax_loss(sim(u, emb[j]), [sim(u, emb[m]) for m in negs])[0]


def example_step(emb: np.ndarray, i: int, j: int, negs, lr: float, cosine: bool = False) -> None:
    """Apply one in-place SGD step of the training kernel (exposed for tests)."""
    negs = np.asarray(negs, dtype=np.int64)
    _example_step(emb, i, j, negs, lr, cosine, *_workspace(len(negs), emb.shape[1]))


def load_table(path: str | Path, kg: KnowledgeGraph) -> EmbeddingTable:
    return EmbeddingTable.read_tsv(path, kg.entities.names)
