import os
from pathlib import Path

import numpy as np
import pytest

from kglinkbench.kg import from_string_triples

ROOT = Path(__file__).resolve().parents[1]
DATA = Path(os.environ.get("KGLINKBENCH_DATA", ROOT / "data"))

# (criterion, status, detail) lines collected by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


def kg_from(rows):
    return from_string_triples([tuple(r.split()) for r in rows])


def random_kg(rng: np.random.Generator, max_entities=50, max_relations=6, max_triples=300):
    """Random graph with every relation indexed (ids assigned by first appearance)."""
    n_ent = int(rng.integers(2, max_entities + 1))
    n_rel = int(rng.integers(1, max_relations + 1))
    n_tri = int(rng.integers(n_rel, max_triples + 1))
    rows = [(f"e{rng.integers(n_ent)}", f"r{rng.integers(n_rel)}", f"e{rng.integers(n_ent)}")
            for _ in range(n_tri)]
    return from_string_triples(rows)


@pytest.fixture
def toy():
    """r1 pairs {(a,b),(a,c),(b,c)}, r2 pairs {(a,b),(c,d)}."""
    return kg_from(["a r1 b", "a r1 c", "b r1 c", "a r2 b", "c r2 d"])


@pytest.fixture(scope="session")
def umls():
    from kglinkbench.kg import load_tsv

    path = DATA / "umls"
    if not path.is_dir():
        pytest.fail(f"UMLS corpus not found at {path}")
    return load_tsv(path)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, status, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"[{status}] {crit}: {detail}")
