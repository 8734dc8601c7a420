"""Command-line entry point: ``kg {stats,describe,split,run,ablate,correlate}``.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .descriptors import describe
from .kg import KGFormatError, load_tsv, stats
from .pipeline import (FACTOR_MODELS, MODELS, ConfigError, RunConfig, correlate,
                       run_ablation, run_benchmark, write_ablation, write_benchmark)
from .splits import SplitConfig, build_splits, write_splits
from .stats import write_correlations

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser, ablation: bool) -> None:
    p.add_argument("--input", required=True, help="triple file(s) directory (ConvE layout) or TSV file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--runs", type=int, default=10, help="repeated sub-sampling runs (default 10)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--dim", type=int, help="embedding dimension (shallow 50, factor 200)")
    p.add_argument("--epochs", type=int, help="training epochs (shallow 10, factor 50)")
    p.add_argument("--neg-k", type=int, default=10, help="negatives per positive during training")
    p.add_argument("--lr", type=float, help="learning rate (shallow 0.05, factor 1e-3)")
    p.add_argument("--batch-size", type=int, default=128, help="factor model batch size")
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                   help="sequential, seed-reproducible training (default on)")
    p.add_argument("--workers", type=int, default=1, help="parallel relation tasks")
    if ablation:
        p.add_argument("--model", choices=(*FACTOR_MODELS, "both"), default="both")
        p.add_argument("--rank-mode", choices=("raw", "filtered", "both"), default="both")
    else:
        p.add_argument("--alpha", type=float, default=0.8, help="retain fraction in (0, 1)")
        p.add_argument("--model", choices=MODELS, default="shallow")
        p.add_argument("--combine", choices=("concat", "sum", "mean", "hadamard"), default="concat")
        p.add_argument("--neg-mode", choices=("semantic", "unrestricted"), default="semantic")
        p.add_argument("--generalized-only", action="store_true",
                       help="skip per-relation specialized embeddings")
        p.add_argument("--run-timeout", type=float,
                       help="seconds per run before remaining relations are skipped")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kg", description="Knowledge graph link prediction benchmark")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="print entity/relation/triple counts as JSON")
    p.add_argument("--input", required=True)

    p = sub.add_parser("describe", help="relation descriptors report")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="directory for heatmap-ready CSV matrices")

    p = sub.add_parser("split", help="dump one set of splits as TSV files")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--neg-mode", choices=("semantic", "unrestricted"), default="semantic")

    _add_run_flags(sub.add_parser("run", help="specialized vs. generalized benchmark"), ablation=False)
    _add_run_flags(sub.add_parser("ablate", help="random ablation with DistMult/ComplEx"), ablation=True)

    p = sub.add_parser("correlate", help="correlate accuracy with descriptors across reports")
    p.add_argument("--reports", nargs="+", required=True, help="report.json files")
    p.add_argument("--names", nargs="+", help="graph names, one per report")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _config(args, ablation: bool) -> RunConfig:
    common = dict(
        input=args.input, out=args.out, runs=args.runs, seed=args.seed, dim=args.dim,
        epochs=args.epochs, neg_k=args.neg_k, learning_rate=args.lr,
        batch_size=args.batch_size, deterministic=args.deterministic, workers=args.workers,
    )
    if ablation:
        models = FACTOR_MODELS if args.model == "both" else (args.model,)
        return RunConfig(models=models, rank_mode=args.rank_mode, **common)
    return RunConfig(alpha=args.alpha, model=args.model, combine=args.combine,
                     neg_mode=args.neg_mode, generalized_only=args.generalized_only,
                     run_timeout=args.run_timeout, **common)


def _dispatch(args) -> int:
    if args.command == "stats":
        print(json.dumps(stats(load_tsv(args.input))))
    elif args.command == "describe":
        report = describe(load_tsv(args.input))
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        report.write_json(args.out)
        if args.csv:
            report.write_csv(args.csv)
    elif args.command == "split":
        cfg = SplitConfig(args.alpha, args.seed, args.neg_mode)
        write_splits(build_splits(load_tsv(args.input), cfg), args.out)
    elif args.command == "run":
        cfg = _config(args, ablation=False)
        cfg.validate()
        write_benchmark(run_benchmark(cfg), args.out)
    elif args.command == "ablate":
        cfg = _config(args, ablation=True)
        cfg.validate(ablation=True)
        write_ablation(run_ablation(cfg), args.out)
    elif args.command == "correlate":
        if args.names and len(args.names) != len(args.reports):
            raise ConfigError("--names must match --reports in length")
        reports = [json.loads(Path(p).read_text(encoding="utf-8")) for p in args.reports]
        result = correlate(reports, args.names)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_correlations(result["per_run"] + result["per_graph_mean"], out / "correlation_report.csv")
        payload = {k: [r.to_dict() for r in v] for k, v in result.items()}
        (out / "correlations.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (KGFormatError, FileNotFoundError, KeyError, json.JSONDecodeError,
            UnicodeDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
