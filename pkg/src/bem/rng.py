"""Seed plumbing: every component draws from a named substream of one seed."""
from __future__ import annotations

import hashlib

import numpy as np


def named_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for the substream of ``seed`` identified by ``label``.

    The same (seed, label) pair always yields the same stream, and distinct
    labels yield independent streams, so components seeded from one CLI-level
    seed cannot perturb each other's draws.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, *words]
    return np.random.default_rng(np.random.SeedSequence(entropy))
