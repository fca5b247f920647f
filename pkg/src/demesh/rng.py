"""Deterministic seeding utilities.

All randomness in the pipeline flows through numpy PCG64 generators built
here, so that (seed, structural position) fully determines every stream on
every platform. Parallel workers never share a generator: each derives its
own via ``split_seed``.
"""

from __future__ import annotations

import zlib

import numpy as np

SeededRng = np.random.Generator


def _key_to_int(key: int | str) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0xFFFFFFFFFFFFFFFF


def split_seed(seed: int, *keys: int | str) -> int:
    """Derive a child seed from a root seed and a structural path.

    Stable across platforms and process restarts; distinct paths give
    independent streams.
    """
    ss = np.random.SeedSequence([_key_to_int(seed), *(_key_to_int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int | str) -> SeededRng:
    """PCG64 generator for the stream at (seed, *keys)."""
    if keys:
        seed = split_seed(seed, *keys)
    return np.random.Generator(np.random.PCG64(seed))
