"""DistMult and ComplEx factorization models trained with Adam.

Parameters are stored as real matrices. A ComplEx vector of dimension d is
kept as 2d reals: real parts first, imaginary parts second.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numba
import numpy as np

from .kg import KnowledgeGraph
from .seeding import stream

KINDS = ("distmult", "complex")
_MAGIC = b"KGBFACT1"
_HEADER = struct.Struct("<8sBIII")


@dataclass(frozen=True)
class FactorConfig:
    dim: int = 200
    epochs: int = 50
    learning_rate: float = 1e-3
    n_neg: int = 10
    batch_size: int = 128
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 0 or self.n_neg < 1 or self.batch_size < 1:
            raise ValueError("invalid factor model configuration")


@dataclass
class FactorModel:
    kind: str
    dim: int
    entity: np.ndarray
    relation: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        width = self.width(self.kind, self.dim)
        if self.entity.shape[1] != width or self.relation.shape[1] != width:
            raise ValueError("parameter width does not match kind and dim")

    @staticmethod
    def width(kind: str, dim: int) -> int:
        return 2 * dim if kind == "complex" else dim

    @property
    def n_entities(self) -> int:
        return self.entity.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation.shape[0]

    def score(self, heads, rels, tails) -> np.ndarray:
        h, r, t = self.entity[heads], self.relation[rels], self.entity[tails]
        return _score(self.kind, h, r, t)

    def score_all(self, heads, rels, tails, side: str) -> np.ndarray:
        """Scores of every entity substituted on ``side``, shape (n_queries, n_entities)."""
        if side == "tail":
            q = _partial(self.kind, self.entity[heads], self.relation[rels], "tail")
        elif side == "head":
            q = _partial(self.kind, self.entity[tails], self.relation[rels], "head")
        else:
            raise ValueError(f"side must be 'head' or 'tail', got {side!r}")
        return q @ self.entity.T

    def save(self, path) -> None:
        header = _HEADER.pack(_MAGIC, KINDS.index(self.kind), self.dim,
                              self.n_entities, self.n_relations)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(self.entity, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.relation, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "FactorModel":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, kind_code, dim, n_ent, n_rel = _HEADER.unpack_from(raw)
        if magic != _MAGIC or kind_code >= len(KINDS):
            raise ValueError(f"{path}: not a factor model checkpoint")
        kind = KINDS[kind_code]
        width = cls.width(kind, dim)
        expected = _HEADER.size + 8 * width * (n_ent + n_rel)
        if len(raw) != expected:
            raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
        body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
        ent = body[: n_ent * width].reshape(n_ent, width)
        rel = body[n_ent * width:].reshape(n_rel, width)
        return cls(kind, dim, ent.copy(), rel.copy())


def _check(*vectors):
    shapes = {np.shape(v) for v in vectors}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def score_distmult(h, r, t) -> float:
    """Trilinear product sum_i h_i r_i t_i."""
    h, r, t = (np.asarray(x, dtype=float) for x in (h, r, t))
    _check(h, r, t)
    return float(np.sum(h * t * r))


def score_complex(h, r, t) -> float:
    """Re(sum_i h_i r_i conj(t_i)) for complex vectors (or complex arrays)."""
    h, r, t = (np.asarray(x, dtype=complex) for x in (h, r, t))
    _check(h, r, t)
    return float(np.real(np.sum(h * r * np.conj(t))))


def _halves(x):
    d = x.shape[-1] // 2
    return x[..., :d], x[..., d:]


def _score(kind, h, r, t):
    if kind == "distmult":
        # entity factors first so that swapping h and t is bitwise symmetric
        return np.sum(h * t * r, axis=-1)
    a, b = _halves(h)
    c, e = _halves(r)
    f, g = _halves(t)
    return np.sum(a * c * f + b * c * g + a * e * g - b * e * f, axis=-1)


def _partial(kind, x, r, side):
    """Vector q with score = q . (substituted entity)."""
    if kind == "distmult":
        return x * r
    a, b = _halves(x)
    c, e = _halves(r)
    if side == "tail":
        # x is the head: coefficients of (f, g)
        return np.concatenate([a * c - b * e, a * e + b * c], axis=-1)
    # x is the tail (f, g): coefficients of (a, b)
    return np.concatenate([c * a + e * b, c * b - e * a], axis=-1)


def score_grads(kind, h, r, t):
    """Scores and their gradients w.r.t. h, r and t (batched over rows)."""
    if kind == "distmult":
        return np.sum(h * t * r, axis=-1), r * t, h * t, h * r
    a, b = _halves(h)
    c, e = _halves(r)
    f, g = _halves(t)
    s = np.sum(a * c * f + b * c * g + a * e * g - b * e * f, axis=-1)
    gh = np.concatenate([c * f + e * g, c * g - e * f], axis=-1)
    gr = np.concatenate([a * f + b * g, a * g - b * f], axis=-1)
    gt = np.concatenate([a * c - b * e, a * e + b * c], axis=-1)
    return s, gh, gr, gt


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def logistic_loss_grads(kind, h, r, t, labels, weights=None):
    """Weighted sum of pointwise logistic losses and gradients.

    Positives (label 1) contribute -log sigmoid(s), negatives -log(1 - sigmoid(s)).
    """
    labels = np.asarray(labels, dtype=float)
    w = np.ones_like(labels) if weights is None else np.asarray(weights, dtype=float)
    s, gh, gr, gt = score_grads(kind, h, r, t)
    loss = float(np.sum(w * np.where(labels > 0.5, _softplus(-s), _softplus(s))))
    ds = (w * (_sigmoid(s) - labels))[:, None]
    return loss, ds * gh, ds * gr, ds * gt


@numba.njit(cache=True, nogil=True)
def _accumulate_grads(complex_kind, ent, rel, trip, labels, weights, l2, g_ent, g_rel):
    """Fused logistic-loss gradient, scattered into g_ent / g_rel."""
    w = ent.shape[1]
    d = w // 2 if complex_kind else w
    for n in range(trip.shape[0]):
        h, r, t = trip[n, 0], trip[n, 1], trip[n, 2]
        s = 0.0
        if complex_kind:
            for i in range(d):
                a, b = ent[h, i], ent[h, d + i]
                c, e = rel[r, i], rel[r, d + i]
                f, g = ent[t, i], ent[t, d + i]
                s += a * c * f + b * c * g + a * e * g - b * e * f
        else:
            for i in range(d):
                s += ent[h, i] * ent[t, i] * rel[r, i]
        if s >= 0:
            sig = 1.0 / (1.0 + np.exp(-s))
        else:
            q = np.exp(s)
            sig = q / (1.0 + q)
        ds = weights[n] * (sig - labels[n])
        reg = 2.0 * l2 * weights[n]
        if complex_kind:
            for i in range(d):
                a, b = ent[h, i], ent[h, d + i]
                c, e = rel[r, i], rel[r, d + i]
                f, g = ent[t, i], ent[t, d + i]
                g_ent[h, i] += ds * (c * f + e * g) + reg * a
                g_ent[h, d + i] += ds * (c * g - e * f) + reg * b
                g_rel[r, i] += ds * (a * f + b * g) + reg * c
                g_rel[r, d + i] += ds * (a * g - b * f) + reg * e
                g_ent[t, i] += ds * (a * c - b * e) + reg * f
                g_ent[t, d + i] += ds * (a * e + b * c) + reg * g
        else:
            for i in range(d):
                hh, rr, tt = ent[h, i], rel[r, i], ent[t, i]
                g_ent[h, i] += ds * rr * tt + reg * hh
                g_rel[r, i] += ds * hh * tt + reg * rr
                g_ent[t, i] += ds * hh * rr + reg * tt


def batch_gradients(model: "FactorModel", trip, labels, weights, l2: float = 0.0):
    """Full-size parameter gradients of the weighted logistic loss over ``trip``."""
    g_ent = np.zeros_like(model.entity)
    g_rel = np.zeros_like(model.relation)
    _accumulate_grads(model.kind == "complex", model.entity, model.relation,
                      np.ascontiguousarray(trip, dtype=np.int64),
                      np.asarray(labels, dtype=float), np.asarray(weights, dtype=float),
                      float(l2), g_ent, g_rel)
    return g_ent, g_rel


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list, grads: list, state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


def init_model(kind: str, n_ent: int, n_rel: int, dim: int, rng: np.random.Generator) -> FactorModel:
    width = FactorModel.width(kind, dim)
    bound = np.sqrt(3.0 / dim)
    return FactorModel(
        kind,
        dim,
        rng.uniform(-bound, bound, size=(n_ent, width)),
        rng.uniform(-bound, bound, size=(n_rel, width)),
    )


def corrupt(kg: KnowledgeGraph, batch: np.ndarray, n_neg: int, rng: np.random.Generator,
            max_tries: int = 10) -> np.ndarray:
    """Replace head or tail (coin flip) by a uniform entity, rejecting known positives."""
    negs = np.repeat(batch, n_neg, axis=0)
    todo = np.arange(len(negs))
    side = rng.integers(2, size=len(negs)) * 2  # column 0 (head) or 2 (tail)
    for _ in range(max_tries):
        negs[todo, side[todo]] = rng.integers(kg.entity_count, size=len(todo))
        hit = kg.contains_many(negs[todo, 0], negs[todo, 1], negs[todo, 2])
        todo = todo[hit]
        if len(todo) == 0:
            break
    return negs


def train_factor(corpus, kg: KnowledgeGraph, kind: str, cfg: FactorConfig = FactorConfig(),
                 init: FactorModel | None = None) -> FactorModel:
    """Minimize the logistic loss of corpus positives vs. sampled corruptions."""
    corpus = np.asarray(corpus, dtype=np.int64).reshape(-1, 3)
    if len(corpus) == 0:
        raise ValueError("empty training corpus")
    rng = stream(cfg.seed, "factor", kind)
    model = init or init_model(kind, kg.entity_count, kg.relation_count, cfg.dim, rng)
    state = AdamState(learning_rate=cfg.learning_rate)
    params = [model.entity, model.relation]
    for _ in range(cfg.epochs):
        order = rng.permutation(len(corpus))
        for start in range(0, len(order), cfg.batch_size):
            pos = corpus[order[start:start + cfg.batch_size]]
            neg = corrupt(kg, pos, cfg.n_neg, rng)
            trip = np.concatenate([pos, neg])
            labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
            # mean positive loss + mean negative loss
            weights = np.concatenate([np.full(len(pos), 1.0 / len(pos)),
                                      np.full(len(neg), 1.0 / len(neg))])
            g_ent, g_rel = batch_gradients(model, trip, labels, weights, cfg.l2)
            adam_step(params, [g_ent, g_rel], state)
    return model


def entity_table(model: FactorModel, corpus, kg: KnowledgeGraph):
    """Entity vectors of a factor model as an embedding table (presence = in corpus)."""
    from .shallow import EmbeddingTable

    corpus = np.asarray(corpus).reshape(-1, 3)
    present = np.zeros(kg.entity_count, dtype=bool)
    present[corpus[:, 0]] = True
    present[corpus[:, 2]] = True
    return EmbeddingTable(model.entity.copy(), present, list(kg.entities.names))
