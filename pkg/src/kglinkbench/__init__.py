"""Benchmark for knowledge graph embeddings under structural ablation."""

__version__ = "0.1.0"

from .descriptors import DescriptorReport, describe
from .kg import KnowledgeGraph, Triple, load_tsv
from .pipeline import RunConfig, run_ablation, run_benchmark
from .splits import SplitConfig, build_splits

__all__ = [
    "DescriptorReport",
    "KnowledgeGraph",
    "RunConfig",
    "SplitConfig",
    "Triple",
    "build_splits",
    "describe",
    "load_tsv",
    "run_ablation",
    "run_benchmark",
]
