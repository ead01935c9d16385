"""Deterministic seed substreams.

Every randomized component draws from a substream keyed by its position in
the work plan (trial index, grid cell, tree index), never from a shared
sequential stream, so results are identical across worker counts.
"""
from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream of `seed` addressed by an integer key path."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *key: int) -> int:
    """A derived integer seed, for components that take seeds rather than rngs."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))


def key_of(label: str) -> int:
    """Stable integer key for a string label (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2s(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2**63)
