"""Seed fan-out: independent, schedule-independent RNG streams keyed by tuples."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator for the stream ``keys`` under master ``seed``.

    Keys may be ints or short purpose strings; the same (seed, keys) always
    yields the same stream, whatever order streams are requested in.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed for the stream ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
