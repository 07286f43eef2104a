"""Obfuscation-degree measurement and trend fitting.

The degree of obfuscation is the Levenshtein distance between the original
and the transformed trace, both abstracted to call names only: it counts
the atomic insert/delete/substitute steps separating the two behaviors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import levenshtein_codes
from .errors import EmptyInputError, IdMismatchError, RankDeficientError
from .trace import Corpus, project_names


@dataclass(frozen=True)
class DegreeReport:
    per_trace: dict[str, int]
    mean_degree: float


def _encode_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    codes: dict[str, int] = {}
    for name in a:
        codes.setdefault(name, len(codes))
    for name in b:
        codes.setdefault(name, len(codes))
    ea = np.fromiter((codes[n] for n in a), dtype=np.int64, count=len(a))
    eb = np.fromiter((codes[n] for n in b), dtype=np.int64, count=len(b))
    return ea, eb


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two call-name sequences."""
    ea, eb = _encode_pair(list(a), list(b))
    return levenshtein_codes(ea, eb)


def obfuscation_degree(original: Corpus, obfuscated: Corpus) -> DegreeReport:
    """Per-trace edit distances (on name projections) and their mean.

    Both corpora must contain exactly the same trace ids.
    """
    orig_by_id = {t.id: t for t in original.traces}
    obf_by_id = {t.id: t for t in obfuscated.traces}
    if orig_by_id.keys() != obf_by_id.keys():
        only_orig = sorted(orig_by_id.keys() - obf_by_id.keys())
        only_obf = sorted(obf_by_id.keys() - orig_by_id.keys())
        raise IdMismatchError(
            f"trace id sets differ (only in original: {only_orig[:5]}, "
            f"only in obfuscated: {only_obf[:5]})")
    if not orig_by_id:
        raise EmptyInputError("no traces to compare")
    per_trace = {
        tid: levenshtein(project_names(orig_by_id[tid]), project_names(obf_by_id[tid]))
        for tid in orig_by_id
    }
    mean = float(sum(per_trace.values()) / len(per_trace))
    return DegreeReport(per_trace=per_trace, mean_degree=mean)


def fit_quadratic_trend(points) -> tuple[float, float, float]:
    """Least-squares coefficients (c0, c1, c2) of y ~ c0 + c1*x + c2*x^2.

    Solved through the normal equations with pivoted elimination. Needs at
    least 3 points with 3 distinct x values; raises RankDeficientError
    otherwise.
    """
    pts = list(points)
    if len(pts) < 3 or len({float(x) for x, _ in pts}) < 3:
        raise RankDeficientError("quadratic fit needs >= 3 points with >= 3 distinct x")
    x = np.asarray([p[0] for p in pts], dtype=np.float64)
    y = np.asarray([p[1] for p in pts], dtype=np.float64)
    design = np.column_stack([np.ones_like(x), x, x * x])
    lhs = design.T @ design
    rhs = design.T @ y
    try:
        coeffs = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(f"normal equations are singular: {exc}") from exc
    return float(coeffs[0]), float(coeffs[1]), float(coeffs[2])
