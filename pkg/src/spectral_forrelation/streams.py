"""Reproducible random streams keyed by (seed, label) and the global enumeration cap."""

import hashlib
import os

import numpy as np

CAP_ENV = "SPECTRAL_FORRELATION_CAP"
DEFAULT_CAP = 200_000


def enumeration_cap():
    raw = os.environ.get(CAP_ENV)
    return int(raw) if raw else DEFAULT_CAP


def _label_key(label):
    if isinstance(label, int):
        return [label & 0xFFFFFFFF, (label >> 32) & 0xFFFFFFFF]
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return [int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:], "little")]


def stream(seed, *labels):
    """Counter-based Philox generator for the given seed and label path."""
    key = []
    for label in labels:
        key += _label_key(label)
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def child(rng, *labels):
    """Derive an independent stream from an existing generator plus labels."""
    seed = int(rng.integers(0, 2**63 - 1))
    return stream(seed, *labels)
