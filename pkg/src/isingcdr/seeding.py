"""Child-seed derivation so every random role draws from an independent stream."""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(master: int, role: str, *indices: int) -> np.random.SeedSequence:
    key = (zlib.crc32(role.encode()),) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(int(master), spawn_key=key)


def derive_rng(master: int, role: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, role, *indices))


def derive_int(master: int, role: str, *indices: int) -> int:
    """A 63-bit integer seed, for APIs that record seeds as plain integers."""
    return int(derive_seed(master, role, *indices).generate_state(1, np.uint64)[0] >> np.uint64(1))
