"""End-to-end benchmark runs: specialized vs. generalized link classifiers,
and random per-relation ablation for factorization models."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import DescriptorReport, describe
from .factor import FactorConfig, entity_table, train_factor
from .kg import KnowledgeGraph, load_tsv
from .linkeval import CombineOp, EvalRecord, LogRegConfig, evaluate_relation
from .ranking import FilterIndex, evaluate_ranking
from .seeding import derive_seed
from .shallow import ShallowConfig, train_shallow
from .splits import NegativeMode, SplitConfig, ablation_alphas, build_splits
from .stats import (DESCRIPTOR_COLUMNS, CorrelationReport, aggregate_runs,
                    correlation_report, histogram, mean_sd, write_correlations)

log = logging.getLogger(__name__)

MODELS = ("shallow", "distmult", "complex")
FACTOR_MODELS = ("distmult", "complex")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    input: str
    alpha: float = 0.8
    runs: int = 10
    model: str = "shallow"
    models: tuple[str, ...] = FACTOR_MODELS
    dim: int | None = None
    epochs: int | None = None
    neg_k: int = 10
    learning_rate: float | None = None
    batch_size: int = 128
    combine: str = "concat"
    neg_mode: str = "semantic"
    generalized_only: bool = False
    seed: int = 0
    deterministic: bool = True
    workers: int = 1
    rank_mode: str = "both"
    run_timeout: float | None = None
    out: str | None = None

    def validate(self, ablation: bool = False) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not ablation and not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if not ablation and self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}")
        if ablation and (not self.models or any(m not in FACTOR_MODELS for m in self.models)):
            raise ConfigError("ablation models must be distmult and/or complex")
        if self.dim is not None and self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.epochs is not None and self.epochs < (0 if ablation else 1):
            raise ConfigError("epochs out of range")
        if self.neg_k < 1 or self.workers < 1 or self.batch_size < 1:
            raise ConfigError("neg_k, workers and batch_size must be >= 1")
        if self.rank_mode not in ("raw", "filtered", "both"):
            raise ConfigError("rank_mode must be raw, filtered or both")
        try:
            CombineOp(self.combine)
            NegativeMode(self.neg_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def echo(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        # where results go is not part of the experiment
        d.pop("out")
        return d

    def shallow_config(self, seed: int) -> ShallowConfig:
        return ShallowConfig(
            dim=self.dim or 50,
            epochs=self.epochs if self.epochs is not None else 10,
            negatives_k=self.neg_k,
            learning_rate=self.learning_rate or 0.05,
            seed=seed,
            parallel=not self.deterministic,
        )

    def factor_config(self, seed: int) -> FactorConfig:
        return FactorConfig(
            dim=self.dim or 200,
            epochs=self.epochs if self.epochs is not None else 50,
            learning_rate=self.learning_rate or 1e-3,
            n_neg=self.neg_k,
            batch_size=self.batch_size,
            seed=seed,
        )

    @property
    def rank_modes(self) -> tuple[str, ...]:
        return ("filtered", "raw") if self.rank_mode == "both" else (self.rank_mode,)


@dataclass
class RunReport:
    config: dict
    descriptors: dict
    records: list[dict] = field(default_factory=list)
    skips: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    ranking: list[dict] = field(default_factory=list)
    runs: list[dict] = field(default_factory=list)
    correlations: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    kind: str = "benchmark"

    def to_dict(self) -> dict:
        d = asdict(self)
        # wall-clock timings vary between runs; they are written separately
        d.pop("timings")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True) + "\n"


def _load(cfg: RunConfig) -> KnowledgeGraph:
    return load_tsv(cfg.input)


def _embed(cfg: RunConfig, corpus, kg: KnowledgeGraph, seed: int):
    if cfg.model == "shallow":
        return train_shallow(corpus, kg, cfg.shallow_config(seed), deterministic=cfg.deterministic)
    model = train_factor(corpus, kg, cfg.model, cfg.factor_config(seed))
    return entity_table(model, corpus, kg)


def _skip(run: int, rel: int, kind: str, reason: str) -> dict:
    return {"run": run, "rel": rel, "kind": kind, "reason": reason}


def run_benchmark(cfg: RunConfig, kg: KnowledgeGraph | None = None) -> RunReport:
    """Repeated random sub-sampling evaluation of specialized and generalized embeddings.

    Within a run both embedding kinds are evaluated on the same relation
    splits; only the training corpus differs.
    """
    cfg.validate()
    kg = kg if kg is not None else _load(cfg)
    t0 = time.perf_counter()
    desc = describe(kg)
    timings: dict = {"describe": time.perf_counter() - t0, "runs": []}
    kinds = ("generalized",) if cfg.generalized_only else ("specialized", "generalized")
    op = CombineOp(cfg.combine)
    records: list[EvalRecord] = []
    skips: list[dict] = []

    for run in range(cfg.runs):
        t_run = time.perf_counter()
        split_cfg = SplitConfig(cfg.alpha, derive_seed(cfg.seed, run, "splits"), cfg.neg_mode)
        splits = build_splits(kg, split_cfg)
        for s in splits.skipped:
            skips.extend(_skip(run, s.rel, k, s.reason) for k in kinds)
        general = _embed(cfg, splits.generalized.corpus, kg,
                         derive_seed(cfg.seed, run, "embed", "generalized"))

        def task(rel, run=run, splits=splits, general=general, t_run=t_run):
            if cfg.run_timeout is not None and time.perf_counter() - t_run > cfg.run_timeout:
                return [_skip(run, rel, k, "run timeout exceeded") for k in kinds]
            retained, split = splits.relations[rel]
            out = []
            if "specialized" in kinds:
                table = _embed(cfg, retained.corpus, kg,
                               derive_seed(cfg.seed, run, "embed", "specialized", rel))
                out.append(evaluate_relation(split, table, op, run, "specialized"))
            out.append(evaluate_relation(split, general, op, run, "generalized"))
            return out

        rels = sorted(splits.relations)
        if cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                results = list(pool.map(task, rels))
        else:
            results = [task(rel) for rel in rels]
        for items in results:
            for item in items:
                if isinstance(item, dict):
                    skips.append(item)
                elif item.skip_reason:
                    skips.append(_skip(item.run, item.rel, item.kind, item.skip_reason))
                else:
                    records.append(item)
        timings["runs"].append(time.perf_counter() - t_run)
        log.info("run %d/%d done in %.1fs", run + 1, cfg.runs, timings["runs"][-1])

    records.sort(key=lambda r: (r.run, r.rel, r.kind))
    skips.sort(key=lambda s: (s["run"], s["rel"], s["kind"]))
    aggregates = aggregate_runs(records)
    hists = {}
    for kind in kinds:
        per_rel = [row for row in aggregates["per_relation"] if row["kind"] == kind]
        hists[kind] = {
            m: histogram(row[m]["mean"] for row in per_rel)
            for m in ("f1", "missing_train_ratio", "missing_test_ratio")
        }
    timings["total"] = time.perf_counter() - t0
    return RunReport(
        config=cfg.echo(),
        descriptors=desc.to_dict(),
        records=[{**r.to_dict(), "relation": kg.relations.name(r.rel)} for r in records],
        skips=[{**s, "relation": kg.relations.name(s["rel"])} for s in skips],
        aggregates=aggregates,
        histograms=hists,
        timings=timings,
        kind="benchmark",
    )


def run_ablation(cfg: RunConfig, kg: KnowledgeGraph | None = None) -> RunReport:
    """Random per-relation ablation; MR/MRR of factorization models on removed triples.

    All models of a run share the same splits. Correlations relate each
    run's metrics to the descriptors of that run's retained graph.
    """
    cfg.validate(ablation=True)
    kg = kg if kg is not None else _load(cfg)
    t0 = time.perf_counter()
    desc = describe(kg)
    index = FilterIndex(kg)
    timings: dict = {"runs": []}
    runs, ranking = [], []
    for run in range(cfg.runs):
        t_run = time.perf_counter()
        alphas = ablation_alphas(kg, derive_seed(cfg.seed, run, "ablation"))
        splits = build_splits(kg, SplitConfig(0.5, derive_seed(cfg.seed, run, "splits")),
                              alphas=alphas, with_negatives=False)
        corpus = splits.generalized.corpus
        test = np.concatenate([s.test_pos for _, s in splits.relations.values()]).reshape(-1, 3)
        retained = describe(kg.subgraph(corpus)).summary()
        for kind in cfg.models:
            model = train_factor(corpus, kg, kind, cfg.factor_config(derive_seed(cfg.seed, run, "model", kind)))
            for mode in cfg.rank_modes:
                res = evaluate_ranking(model, test, kg, mode, index)
                ranking.append({"model": kind, "run": run, **res.to_dict()})
        runs.append({
            "run": run,
            "alphas": {kg.relations.name(r): a for r, a in alphas.items()},
            "n_train": int(len(corpus)),
            "n_test": int(len(test)),
            "skipped": [{"rel": s.rel, "reason": s.reason} for s in splits.skipped],
            "retained_descriptors": retained,
        })
        timings["runs"].append(time.perf_counter() - t_run)
        log.info("ablation run %d/%d done in %.1fs", run + 1, cfg.runs, timings["runs"][-1])

    correlations = []
    by_run = {r["run"]: r["retained_descriptors"] for r in runs}
    for kind in cfg.models:
        for mode in cfg.rank_modes:
            points = [{"mrr": r["mrr"], "mr": r["mr"], **by_run[r["run"]]}
                      for r in ranking if r["model"] == kind and r["mode"] == mode]
            correlations.append(correlation_report(points, ["mrr", "mr"], group=f"{kind}/{mode}").to_dict())
    timings["total"] = time.perf_counter() - t0
    return RunReport(
        config=cfg.echo(),
        descriptors=desc.to_dict(),
        ranking=ranking,
        runs=runs,
        correlations=correlations,
        timings=timings,
        kind="ablation",
    )


def _graph_name(report: dict, fallback: str) -> str:
    return str(report.get("config", {}).get("input") or fallback)


def report_points(report: dict, name: str) -> list[dict]:
    """Per-run accuracy points of one report, with its graph descriptors attached."""
    summary = DescriptorReport.from_dict(report["descriptors"]).summary()
    points = []
    if report.get("kind") == "ablation":
        for r in report["ranking"]:
            points.append({"graph": name, "group": f"{r['model']}/{r['mode']}", "run": r["run"],
                           "mrr": r["mrr"], "mr": r["mr"], **summary})
    else:
        per_run: dict[tuple, list] = {}
        for rec in report["records"]:
            per_run.setdefault((rec["kind"], rec["run"]), []).append(rec["f1"])
        for (kind, run), f1s in sorted(per_run.items()):
            points.append({"graph": name, "group": kind, "run": run,
                           "mean_f1": float(np.mean(f1s)), **summary})
    return points


def correlate(reports: list[dict], names: list[str] | None = None) -> dict:
    """Correlate accuracy with graph descriptors across reports (one per graph).

    Emits both per-run points (graph descriptors repeated per run) and
    per-graph means.
    """
    names = names or [_graph_name(r, f"graph{i}") for i, r in enumerate(reports)]
    points = [p for rep, name in zip(reports, names) for p in report_points(rep, name)]
    out: dict[str, list[CorrelationReport]] = {"per_run": [], "per_graph_mean": []}
    for group in sorted({p["group"] for p in points}):
        pts = [p for p in points if p["group"] == group]
        metrics = ["mrr", "mr"] if "mrr" in pts[0] else ["mean_f1"]
        out["per_run"].append(correlation_report(pts, metrics, group=group))
        means = []
        for name in dict.fromkeys(p["graph"] for p in pts):
            g = [p for p in pts if p["graph"] == name]
            row = {d: g[0][d] for d in DESCRIPTOR_COLUMNS}
            for m in metrics:
                row[m] = mean_sd(p[m] for p in g)[0]
            means.append(row)
        out["per_graph_mean"].append(correlation_report(means, metrics, group=group))
    return out


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def write_benchmark(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(report.aggregates, indent=2) + "\n", encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2) + "\n", encoding="utf-8")
    for kind in ("specialized", "generalized"):
        rows = [[r["run"], r["relation"], _fmt(r["f1"]), _fmt(r["roc_auc"]),
                 _fmt(r["missing_train_ratio"]), _fmt(r["missing_test_ratio"]),
                 r["n_train_used"], r["n_test_used"]]
                for r in report.records if r["kind"] == kind]
        if rows or not report.config.get("generalized_only") or kind == "generalized":
            _write_csv(out / f"records_{kind}.csv",
                       ["run", "relation", "f1", "auc", "miss_train", "miss_test", "n_train", "n_test"],
                       rows)
    rows = []
    for kind, metrics in report.histograms.items():
        for metric, bins in metrics.items():
            rows.extend([kind, metric, b["lo"], b["hi"], b["count"]] for b in bins)
    _write_csv(out / "histograms.csv", ["kind", "metric", "lo", "hi", "count"], rows)
    DescriptorReport.from_dict(report.descriptors).write_csv(out / "descriptors")


def write_ablation(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2) + "\n", encoding="utf-8")
    _write_csv(out / "rank_results.csv", ["model", "run", "mode", "mr", "mrr", "n_queries"],
               [[r["model"], r["run"], r["mode"], repr(r["mr"]), repr(r["mrr"]), r["n_queries"]]
                for r in report.ranking])
    reps = [CorrelationReport(c["metrics"], c["descriptors"], c["rho"], c["n_points"], c["group"])
            for c in report.correlations]
    write_correlations(reps, out / "correlation_report.csv")
