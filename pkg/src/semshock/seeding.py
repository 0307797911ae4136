"""Deterministic seed derivation.

A single master seed fans out to per-task generators through
``numpy.random.SeedSequence`` keyed on a counter tuple, so the same
(master seed, task key) always yields the same stream regardless of
scheduling or evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_ints(key: tuple) -> tuple[int, ...]:
    out = []
    for part in key:
        if isinstance(part, (int, np.integer)):
            out.append(int(part) & 0xFFFFFFFF)
        else:
            out.append(zlib.crc32(str(part).encode("utf-8")))
    return tuple(out)


def derive_rng(master_seed: int, *key) -> np.random.Generator:
    """Return a Generator for a task identified by ``key`` under ``master_seed``.

    String key parts are hashed with CRC32 (stable across processes, unlike
    the builtin ``hash``).
    """
    ss = np.random.SeedSequence((int(master_seed),) + _key_to_ints(key))
    return np.random.default_rng(ss)


def derive_seed(master_seed: int, *key) -> int:
    """Derive a 32-bit integer sub-seed from the master seed and a task key."""
    ss = np.random.SeedSequence((int(master_seed),) + _key_to_ints(key))
    return int(ss.generate_state(1)[0])
