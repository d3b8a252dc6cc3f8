"""
Seeding Module
--------------
Isolated, reproducible random streams derived from one master seed.
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *salt) -> int:
    """
    Derive a sub-seed from the master seed and any salt (str, int, bytes).

    The same (master_seed, salt) always yields the same seed, and different
    salts give unrelated streams.
    """
    h = hashlib.sha256(str(int(master_seed)).encode())
    for part in salt:
        h.update(b"\x00")
        h.update(part if isinstance(part, bytes) else str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(master_seed: int, *salt) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *salt))


def as_f32(array) -> np.ndarray:
    """
    Round values to float32 precision and return them as float64.
    """
    return np.asarray(array, dtype=np.float32).astype(np.float64)
