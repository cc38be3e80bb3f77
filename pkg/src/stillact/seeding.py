"""Seed splitting.

Every random stream in a run is derived from one integer seed plus a tuple
of keys naming the stream, e.g. ``rng(seed, "pretrain", "layer1")``.
Strings are hashed with SHA-256 (stable across processes, unlike ``hash``)
and the resulting integers are fed to :class:`numpy.random.SeedSequence`.
"""

import hashlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"negative seed key {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed, *keys):
    return np.random.SeedSequence([_key_to_int(seed)] + [_key_to_int(k) for k in keys])


def derive_seed(seed, *keys):
    """Derive a 64-bit child seed for the stream named by ``keys``."""
    return int(seed_sequence(seed, *keys).generate_state(1, np.uint64)[0])


def rng(seed, *keys):
    return np.random.default_rng(seed_sequence(seed, *keys))
