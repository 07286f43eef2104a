"""n-gram featurization of traces.

Two window representations over the name-projected trace:
  * ordered: the window itself, an n-tuple of call names
  * unordered: the window's call-count multiset, insensitive to order inside
    the window (canonicalized here as the sorted n-tuple of names, a
    bijective encoding of the per-window count vector)

A trace aggregates to one bag of window tokens, so one trace yields one
classification downstream.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog
from .errors import ParamError, ShortTraceWarning, UnknownNameError
from .trace import Trace, project_names

ORDERED = "ordered"
UNORDERED = "unordered"
MODES = (ORDERED, UNORDERED)


@dataclass(frozen=True)
class FeatureConfig:
    n: int
    mode: str

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ParamError(f"gram size must be an integer >= 2, got {self.n!r}")
        if self.mode not in MODES:
            raise ParamError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class FeatureVector:
    trace_id: str
    tokens: dict[tuple[str, ...], int]

    def total(self) -> int:
        return sum(self.tokens.values())


def extract_ordered_ngrams(names, n: int) -> list[tuple[str, ...]]:
    """All length-n windows of `names`, in order; empty when len(names) < n."""
    if n < 2:
        raise ParamError(f"gram size must be >= 2, got {n}")
    names = list(names)
    return [tuple(names[i:i + n]) for i in range(len(names) - n + 1)]


def extract_unordered_vectors(names, n: int, alphabet) -> list[list[int]]:
    """Per-window count vectors over `alphabet`; each vector sums to n."""
    if n < 2:
        raise ParamError(f"gram size must be >= 2, got {n}")
    alphabet = list(alphabet)
    index = {name: i for i, name in enumerate(alphabet)}
    names = list(names)
    unknown = sorted({x for x in names if x not in index})
    if unknown:
        raise UnknownNameError(f"names outside alphabet: {unknown}")
    vectors = []
    for i in range(len(names) - n + 1):
        vec = [0] * len(alphabet)
        for name in names[i:i + n]:
            vec[index[name]] += 1
        vectors.append(vec)
    return vectors


def featurize(trace: Trace, config: FeatureConfig, catalog: Catalog) -> FeatureVector:
    """Bag of window tokens for one trace.

    Ordered mode keys tokens by the n-tuple of names, unordered mode by the
    sorted n-tuple (the count-vector encoding). Warns and returns an empty
    bag when the trace is shorter than the window.
    """
    names = project_names(trace)
    unknown = sorted({x for x in names if x not in catalog})
    if unknown:
        raise UnknownNameError(f"trace {trace.id!r}: names outside alphabet: {unknown}")
    if len(names) < config.n:
        warnings.warn(
            f"trace {trace.id!r} has {len(names)} events, shorter than n={config.n}",
            ShortTraceWarning, stacklevel=2)
        return FeatureVector(trace_id=trace.id, tokens={})
    windows = extract_ordered_ngrams(names, config.n)
    if config.mode == UNORDERED:
        windows = [tuple(sorted(w)) for w in windows]
    return FeatureVector(trace_id=trace.id, tokens=dict(Counter(windows)))


# -- packed fast path ---------------------------------------------------------
#
# With B = number of alphabet bits, a window packs into one int64 whenever
# n * B <= 63, which covers the shipped catalog (5 bits) up to 12-grams.
# The sweep keeps tokens in packed form end to end; equivalence with the
# dict-of-tuples path above is property-tested.

def pack_bits(alphabet_size: int) -> int:
    if alphabet_size < 1:
        raise ParamError("alphabet must be non-empty")
    return max(1, (alphabet_size - 1).bit_length())


def packable(alphabet_size: int, n: int) -> bool:
    return n * pack_bits(alphabet_size) <= 63


def pack_token(codes, bits: int) -> int:
    value = 0
    for c in codes:
        value = (value << bits) | int(c)
    return value


def unpack_token(value: int, n: int, bits: int) -> tuple[int, ...]:
    mask = (1 << bits) - 1
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = value & mask
        value >>= bits
    return tuple(out)


def packed_token_counts(codes: np.ndarray, n: int, mode: str,
                        alphabet_size: int) -> tuple[np.ndarray, np.ndarray]:
    """(sorted unique packed tokens, counts) of all length-n windows of `codes`."""
    bits = pack_bits(alphabet_size)
    if n * bits > 63:
        raise ParamError(f"cannot pack {n}-grams over a {alphabet_size}-name alphabet")
    if codes.shape[0] < n:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    windows = np.lib.stride_tricks.sliding_window_view(codes, n)
    if mode == UNORDERED:
        windows = np.sort(windows, axis=1)
    packed = windows[:, 0].astype(np.int64, copy=True)
    for k in range(1, n):
        packed <<= bits
        packed |= windows[:, k]
    return np.unique(packed, return_counts=True)
