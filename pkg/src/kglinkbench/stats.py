"""Run aggregation and Spearman correlation of accuracy against descriptors."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

DESCRIPTOR_COLUMNS = ("frob_S", "frob_S_prime", "n_triples", "mean_mu", "mean_z")


def midranks(values) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(len(x), dtype=float)
    start = 0
    n = len(x)
    while start < n:
        stop = start + 1
        while stop < n and sorted_x[stop] == sorted_x[start]:
            stop += 1
        ranks[order[start:stop]] = (start + 1 + stop) / 2.0
        start = stop
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation of midranks. ``None`` when either side is constant."""
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    if len(x) < 3:
        raise ValueError("spearman needs at least 3 points")
    rx = midranks(x)
    ry = midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return None
    rho = float(rx @ ry) / denom
    return max(-1.0, min(1.0, rho))


def mean_sd(values: Iterable[float]) -> tuple[float, float, int]:
    """Mean, sample SD (0 for a single value) and count."""
    v = np.asarray([x for x in values], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan"), 0
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), sd, int(v.size)


METRICS = ("f1", "roc_auc", "missing_train_ratio", "missing_test_ratio")


def _get(record, name):
    return record[name] if isinstance(record, Mapping) else getattr(record, name)


def aggregate_runs(records) -> dict:
    """Per-(relation, kind) means/SDs over runs, then overall means/SDs per kind.

    The overall figures summarize the per-relation means. Records carrying a
    ``skip_reason`` are ignored; missing AUC values are left out of the AUC
    statistics only.
    """
    groups: dict[tuple, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for rec in records:
        if _get(rec, "skip_reason"):
            continue
        key = (_get(rec, "rel"), _get(rec, "kind"))
        for m in METRICS:
            value = _get(rec, m)
            if value is not None:
                groups[key][m].append(value)
    per_relation = []
    by_kind: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for (rel, kind) in sorted(groups):
        row = {"rel": rel, "kind": kind}
        for m in METRICS:
            mean, sd, n = mean_sd(groups[rel, kind][m])
            row[m] = {"mean": mean, "sd": sd, "n": n}
            if n:
                by_kind[kind][m].append(mean)
        per_relation.append(row)
    overall = {}
    for kind in sorted(by_kind):
        overall[kind] = {}
        for m in METRICS:
            mean, sd, n = mean_sd(by_kind[kind][m])
            overall[kind][m] = {"mean": mean, "sd": sd, "n": n}
    return {"per_relation": per_relation, "overall": overall}


@dataclass
class CorrelationReport:
    """Spearman rho of each metric (rows) against each descriptor (columns)."""

    metrics: list[str]
    descriptors: list[str]
    rho: list[list[float | None]]
    n_points: int
    group: str = ""

    def cell(self, metric: str, descriptor: str) -> float | None:
        return self.rho[self.metrics.index(metric)][self.descriptors.index(descriptor)]

    def to_dict(self) -> dict:
        return {"group": self.group, "metrics": self.metrics, "descriptors": self.descriptors,
                "rho": self.rho, "n_points": self.n_points}


def correlation_report(points: Sequence[Mapping], metrics: Sequence[str],
                       descriptors: Sequence[str] = DESCRIPTOR_COLUMNS,
                       group: str = "") -> CorrelationReport:
    """Correlate metric columns with descriptor columns over ``points``.

    Each point maps column names to values. Cells with fewer than 3 points or
    constant ranks are ``None``.
    """
    rho: list[list[float | None]] = []
    for m in metrics:
        row = []
        for d in descriptors:
            pairs = [(p[m], p[d]) for p in points
                     if p.get(m) is not None and p.get(d) is not None
                     and not (isinstance(p[m], float) and math.isnan(p[m]))]
            if len(pairs) < 3:
                row.append(None)
            else:
                xs, ys = zip(*pairs)
                row.append(spearman(xs, ys))
        rho.append(row)
    return CorrelationReport(list(metrics), list(descriptors), rho, len(points), group)


def write_correlations(reports: Sequence[CorrelationReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        descriptors = reports[0].descriptors if reports else list(DESCRIPTOR_COLUMNS)
        w.writerow(["group", "metric", *descriptors, "n_points"])
        for rep in reports:
            for metric, row in zip(rep.metrics, rep.rho):
                cells = ["" if v is None else repr(v) for v in row]
                w.writerow([rep.group, metric, *cells, rep.n_points])


def histogram(values: Iterable[float], width: float = 0.05) -> list[dict]:
    """Counts over [0, 1] in bins of ``width``; the last bin is closed."""
    n_bins = int(round(1.0 / width))
    counts = [0] * n_bins
    for v in values:
        if v is None or math.isnan(v):
            continue
        i = min(int(math.floor(v / width + 1e-12)), n_bins - 1)
        counts[max(i, 0)] += 1
    return [{"lo": round(i * width, 10), "hi": round((i + 1) * width, 10), "count": c}
            for i, c in enumerate(counts)]
