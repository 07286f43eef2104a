"""Deterministic, splittable random streams.

Every stochastic step in the pipeline draws from a stream derived from a
64-bit seed plus a list of parts (trace ids, cell indices, stage names).
Streams are backed by Philox, a counter-based generator, so results are
independent of the order in which traces or grid cells are processed.

Python's built-in hash() is salted per process, so parts are folded into
the seed with 64-bit FNV-1a, which is stable across runs and platforms.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _to_bytes(part: int | str | bytes) -> bytes:
    if isinstance(part, bytes):
        return part
    if isinstance(part, int):
        return (part & _MASK64).to_bytes(8, "little")
    return part.encode("utf-8")


def mix(seed: int, *parts: int | str | bytes) -> int:
    """Fold `parts` into `seed`, returning a stable 64-bit value."""
    h = _FNV_OFFSET
    for chunk in (_to_bytes(seed),) + tuple(_to_bytes(p) for p in parts):
        # length separator keeps ("ab","c") distinct from ("a","bc")
        h ^= len(chunk)
        h = (h * _FNV_PRIME) & _MASK64
        for byte in chunk:
            h ^= byte
            h = (h * _FNV_PRIME) & _MASK64
    return h


def stream(seed: int, *parts: int | str | bytes) -> np.random.Generator:
    """A Philox-backed Generator keyed by (seed, *parts)."""
    return np.random.Generator(np.random.Philox(key=mix(seed, *parts)))
