"""Hot numeric kernels: edit distance over integer-coded call sequences.

Two interchangeable backends:
  * a numba @njit two-row dynamic program (default when numba is importable)
  * a pure-numpy row-vectorized fallback

Set CALLBLUR_PURE_NUMPY=1 to force the numpy path. benchmarks/bench_levenshtein.py
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("CALLBLUR_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes"}


def _levenshtein_numpy(a: np.ndarray, b: np.ndarray) -> int:
    # Row i is derived from row i-1 with vectorized ops; the insertion chain
    # D[i][j] = min(D[i][j], D[i][j-1]+1) is a running minimum of (row - j).
    if b.shape[0] > a.shape[0]:
        a, b = b, a
    nb = b.shape[0]
    offsets = np.arange(nb + 1, dtype=np.int64)
    row = offsets.copy()
    for i in range(a.shape[0]):
        prev = row
        row = np.empty(nb + 1, dtype=np.int64)
        row[0] = i + 1
        np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i]), out=row[1:])
        row = np.minimum.accumulate(row - offsets) + offsets
    return int(row[nb])


try:
    if _FORCE_NUMPY:
        raise ImportError("pure-numpy backend forced via CALLBLUR_PURE_NUMPY")
    from numba import njit

    @njit(cache=True)
    def _levenshtein_numba(a, b):  # pragma: no cover - exercised via dispatch
        if b.shape[0] > a.shape[0]:
            a, b = b, a
        nb = b.shape[0]
        prev = np.empty(nb + 1, dtype=np.int64)
        cur = np.empty(nb + 1, dtype=np.int64)
        for j in range(nb + 1):
            prev[j] = j
        for i in range(a.shape[0]):
            cur[0] = i + 1
            ai = a[i]
            for j in range(1, nb + 1):
                d = prev[j] + 1
                if cur[j - 1] + 1 < d:
                    d = cur[j - 1] + 1
                sub = prev[j - 1] + (0 if b[j - 1] == ai else 1)
                if sub < d:
                    d = sub
                cur[j] = d
            prev, cur = cur, prev
        return prev[nb]

    def _levenshtein_active(a: np.ndarray, b: np.ndarray) -> int:
        return int(_levenshtein_numba(a, b))

    BACKEND = "numba"
except ImportError:
    _levenshtein_active = _levenshtein_numpy
    BACKEND = "numpy"


def levenshtein_codes(a: np.ndarray, b: np.ndarray) -> int:
    """Unit-cost edit distance between two int64 code arrays.

    Memory is proportional to the shorter sequence (two rolling rows).
    """
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if a.shape[0] == 0:
        return int(b.shape[0])
    if b.shape[0] == 0:
        return int(a.shape[0])
    return _levenshtein_active(a, b)


def active_backend() -> str:
    return BACKEND
