"""Named sub-seed derivation so every pipeline stage draws from its own stream.

All randomness in the package flows from one integer master seed. Each
consumer asks for a generator by name ("walks:original", "actor-init", ...),
which keeps stages independently reproducible: changing how many numbers one
stage draws never perturbs another stage.
"""

import hashlib

import numpy as np


def _stable_hash(name: str) -> int:
    # Python's built-in hash() is salted per process; use sha256 instead.
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def derive_rng(master_seed: int, name: str) -> np.random.Generator:
    """Return a Generator keyed by (master_seed, name), stable across runs."""
    return np.random.default_rng(np.random.SeedSequence([master_seed & 0xFFFFFFFF, _stable_hash(name)]))


def derive_seed(master_seed: int, name: str) -> int:
    """Integer form of derive_rng for APIs that take a plain seed."""
    ss = np.random.SeedSequence([master_seed & 0xFFFFFFFF, _stable_hash(name)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
