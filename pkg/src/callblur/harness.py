"""Parameter-grid sweep: obfuscate, featurize, classify, measure, report.

One grid cell = one obfuscation profile. For every cell the malware traces
are obfuscated (goodware is never touched), re-featurized at each gram
size and mode, and scored by classifiers trained once on the clean corpus.
Each cell yields its mean obfuscation degree and one detection rate per
(gram size, mode, classifier).

Cells are tagged by family for reporting: profiles where reordering is
inert (p_r = 0) count as insertion_only, profiles where insertion is inert
(p_i = 0) as reordering_only, everything else as combined. This split is a
reporting convention of this harness, not an intrinsic property of the
profiles.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from ._kernels import levenshtein_codes
from .catalog import Catalog
from .classify import ALGORITHMS, PackedScorer, TrainedModel, predict, train
from .errors import EmptyInputError, RankDeficientError, SpecError
from .features import (MODES, FeatureConfig, featurize, packable,
                       packed_token_counts)
from .metrics import fit_quadratic_trend
from .obfuscate import (InsertionParams, ObfuscationProfile, ReorderingParams,
                        apply_profile)
from .rng import mix
from .trace import MALWARE, Corpus, Trace, project_names

log = logging.getLogger(__name__)

COMBINED = "combined"
INSERTION_ONLY = "insertion_only"
REORDERING_ONLY = "reordering_only"

DEFAULT_P_VALUES = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_MAX_I_VALUES = (1, 5, 10)
DEFAULT_GRAM_SIZES = tuple(range(3, 11))

RESULT_COLUMNS = ("profile_id", "family", "p_i", "min_i", "max_i", "p_r",
                  "queue_size", "p_ri", "min_ri", "max_ri", "gram_size",
                  "mode", "classifier", "mean_degree", "detection_rate")


@dataclass(frozen=True)
class GridSpec:
    p_values: tuple[float, ...] = DEFAULT_P_VALUES
    max_i_values: tuple[int, ...] = DEFAULT_MAX_I_VALUES
    min_i: int = 1
    min_ri: int = 1
    max_ri: int = 3
    queue_size: int = 5
    gram_sizes: tuple[int, ...] = DEFAULT_GRAM_SIZES
    modes: tuple[str, ...] = MODES
    classifier_ids: tuple[str, ...] = ALGORITHMS
    master_seed: int = 0

    def __post_init__(self):
        if not self.p_values or not self.max_i_values:
            raise SpecError("p_values and max_i_values must be non-empty")
        if any(not 0.0 <= p <= 1.0 for p in self.p_values):
            raise SpecError("probabilities must lie in [0, 1]")
        if any(g < 2 for g in self.gram_sizes) or not self.gram_sizes:
            raise SpecError("gram sizes must be integers >= 2")
        if any(m not in MODES for m in self.modes) or not self.modes:
            raise SpecError(f"modes must be drawn from {MODES}")
        if any(c not in ALGORITHMS for c in self.classifier_ids) or not self.classifier_ids:
            raise SpecError(f"classifiers must be drawn from {ALGORITHMS}")
        if self.min_i < 0 or self.min_ri < 0 or self.max_ri < self.min_ri:
            raise SpecError("fixed insertion bounds are inconsistent")
        if self.queue_size < 1:
            raise SpecError("queue_size must be >= 1")
        if any(m < self.min_i for m in self.max_i_values):
            raise SpecError("every max_i must be >= min_i")


@dataclass(frozen=True)
class SweepResult:
    profile_id: int
    profile: ObfuscationProfile
    family: str
    gram_size: int
    mode: str
    classifier: str
    mean_degree: float
    detection_rate: float
    error: str | None = None


def family_of(p_i: float, p_r: float) -> str:
    # p_r = 0 leaves the delay queue empty, so p_ri never fires either
    if p_r == 0.0:
        return INSERTION_ONLY
    if p_i == 0.0:
        return REORDERING_ONLY
    return COMBINED


def enumerate_grid(spec: GridSpec) -> list[tuple[ObfuscationProfile, str]]:
    """All (profile, family) cells: the product p_i x p_r x p_ri x max_i.

    Cell seeds are mixed from the master seed and the cell index, so the
    enumeration is deterministic and stable under re-runs.
    """
    cells = []
    index = 0
    for p_i in spec.p_values:
        for p_r in spec.p_values:
            for p_ri in spec.p_values:
                for max_i in spec.max_i_values:
                    profile = ObfuscationProfile(
                        seed=mix(spec.master_seed, "cell", index),
                        insertion=InsertionParams(p_i=p_i, min_i=spec.min_i, max_i=max_i),
                        reordering=ReorderingParams(
                            p_r=p_r, queue_size=spec.queue_size, p_ri=p_ri,
                            min_ri=spec.min_ri, max_ri=spec.max_ri),
                    )
                    cells.append((profile, family_of(p_i, p_r)))
                    index += 1
    return cells


def load_grid_spec(path) -> GridSpec:
    """Read a GridSpec from JSON; absent keys keep their defaults."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise SpecError(f"{path}: expected a JSON object")
    kwargs = {}
    for key, caster in (
            ("p_values", lambda v: tuple(float(x) for x in v)),
            ("max_i_values", lambda v: tuple(int(x) for x in v)),
            ("gram_sizes", lambda v: tuple(int(x) for x in v)),
            ("modes", tuple), ("classifier_ids", tuple),
            ("min_i", int), ("min_ri", int), ("max_ri", int),
            ("queue_size", int), ("master_seed", int)):
        if key in raw:
            try:
                kwargs[key] = caster(raw[key])
            except (TypeError, ValueError) as exc:
                raise SpecError(f"{path}: bad value for {key}: {exc}") from exc
    return GridSpec(**kwargs)


class _CleanModels:
    """Models trained once on the unobfuscated corpus, plus fast scorers."""

    def __init__(self, corpus: Corpus, spec: GridSpec, catalog: Catalog):
        self.catalog = catalog
        self.models: dict[tuple[int, str, str], TrainedModel] = {}
        self.scorers: dict[tuple[int, str, str], PackedScorer] = {}
        for gram in spec.gram_sizes:
            for mode in spec.modes:
                config = FeatureConfig(n=gram, mode=mode)
                labeled = [(featurize(t, config, catalog), t.label) for t in corpus.traces]
                for algorithm in spec.classifier_ids:
                    model = train(labeled, algorithm, config=config)
                    self.models[(gram, mode, algorithm)] = model
                    if packable(len(catalog.alphabet), gram):
                        self.scorers[(gram, mode, algorithm)] = PackedScorer(model, catalog)

    def detection_rate(self, gram: int, mode: str, algorithm: str,
                       obfuscated: list[Trace],
                       packed: dict[tuple[int, str], list] | None) -> float:
        key = (gram, mode, algorithm)
        scorer = self.scorers.get(key)
        if scorer is not None and packed is not None:
            hits = 0
            for tokens, counts in packed[(gram, mode)]:
                if scorer.predict(tokens, counts)[0] == MALWARE:
                    hits += 1
            return hits / len(obfuscated)
        model = self.models[key]
        config = FeatureConfig(n=gram, mode=mode)
        hits = 0
        for t in obfuscated:
            fv = featurize(t, config, self.catalog)
            if predict(model, fv)[0] == MALWARE:
                hits += 1
        return hits / len(obfuscated)


def run_sweep(corpus: Corpus, spec: GridSpec, catalog: Catalog) -> list[SweepResult]:
    """Evaluate every grid cell against the corpus.

    The output is a pure function of (corpus, spec, catalog): per-cell seeds
    come from the cell position and per-trace streams from trace ids, so
    any execution order gives identical rows. Cells that raise are emitted
    with NaN measurements and an error note rather than dropped.
    """
    malware = corpus.by_label(MALWARE)
    goodware = corpus.by_label(GOODWARE)
    if not malware or not goodware:
        raise SpecError("sweep corpus must contain both malware and goodware traces")
    models = _CleanModels(corpus, spec, catalog)
    original_codes = {t.id: catalog.encode(project_names(t)) for t in malware}
    use_packed = all(packable(len(catalog.alphabet), g) for g in spec.gram_sizes)

    results: list[SweepResult] = []
    for profile_id, (profile, family) in enumerate(enumerate_grid(spec)):
        try:
            results.extend(_run_cell(profile_id, profile, family, malware, models,
                                     original_codes, spec, catalog, use_packed))
        except Exception as exc:  # noqa: BLE001 - cell errors become row markers
            log.warning("cell %d failed: %s", profile_id, exc)
            for gram in spec.gram_sizes:
                for mode in spec.modes:
                    for algorithm in spec.classifier_ids:
                        results.append(SweepResult(
                            profile_id=profile_id, profile=profile, family=family,
                            gram_size=gram, mode=mode, classifier=algorithm,
                            mean_degree=float("nan"), detection_rate=float("nan"),
                            error=str(exc)))
    return results


def _run_cell(profile_id, profile, family, malware, models, original_codes,
              spec, catalog, use_packed):
    obfuscated = [apply_profile(t, profile, catalog) for t in malware]
    degrees = []
    obf_codes = []
    for t in obfuscated:
        codes = catalog.encode(project_names(t))
        obf_codes.append(codes)
        degrees.append(levenshtein_codes(original_codes[t.id], codes))
    mean_degree = float(sum(degrees) / len(degrees))

    packed = None
    if use_packed:
        packed = {}
        for gram in spec.gram_sizes:
            for mode in spec.modes:
                packed[(gram, mode)] = [
                    packed_token_counts(codes, gram, mode, len(catalog.alphabet))
                    for codes in obf_codes]
    rows = []
    for gram in spec.gram_sizes:
        for mode in spec.modes:
            for algorithm in spec.classifier_ids:
                rate = models.detection_rate(gram, mode, algorithm, obfuscated, packed)
                rows.append(SweepResult(
                    profile_id=profile_id, profile=profile, family=family,
                    gram_size=gram, mode=mode, classifier=algorithm,
                    mean_degree=mean_degree, detection_rate=rate))
    return rows


# -- reporting ----------------------------------------------------------------

def _fmt(value: float) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def result_row(r: SweepResult) -> list[str]:
    ins = r.profile.insertion
    reo = r.profile.reordering
    return [
        str(r.profile_id), r.family,
        _fmt(ins.p_i) if ins else "", str(ins.min_i) if ins else "",
        str(ins.max_i) if ins else "",
        _fmt(reo.p_r) if reo else "", str(reo.queue_size) if reo else "",
        _fmt(reo.p_ri) if reo else "", str(reo.min_ri) if reo else "",
        str(reo.max_ri) if reo else "",
        str(r.gram_size), r.mode, r.classifier,
        _fmt(r.mean_degree), _fmt(r.detection_rate),
    ]


def render_results_csv(results: list[SweepResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in results:
        writer.writerow(result_row(r))
    return buf.getvalue()


def parse_results_csv(path) -> list[SweepResult]:
    """Read a results.csv back into SweepResult rows (profile seeds are not
    stored in the CSV and come back as 0; they play no role in reporting)."""
    results = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RESULT_COLUMNS:
            raise SpecError(f"{path}: unexpected results.csv header")
        for row in reader:
            insertion = None
            if row["p_i"]:
                insertion = InsertionParams(p_i=float(row["p_i"]), min_i=int(row["min_i"]),
                                            max_i=int(row["max_i"]))
            reordering = None
            if row["p_r"]:
                reordering = ReorderingParams(
                    p_r=float(row["p_r"]), queue_size=int(row["queue_size"]),
                    p_ri=float(row["p_ri"]), min_ri=int(row["min_ri"]),
                    max_ri=int(row["max_ri"]))
            results.append(SweepResult(
                profile_id=int(row["profile_id"]),
                profile=ObfuscationProfile(seed=0, insertion=insertion,
                                           reordering=reordering),
                family=row["family"], gram_size=int(row["gram_size"]),
                mode=row["mode"], classifier=row["classifier"],
                mean_degree=float(row["mean_degree"]),
                detection_rate=float(row["detection_rate"])))
    return results


def render_trends_csv(results: list[SweepResult]) -> str:
    """Quadratic trend coefficients per (family, gram size, mode, classifier)."""
    groups: dict[tuple, list[tuple[float, float]]] = {}
    for r in results:
        if r.error is not None or np.isnan(r.mean_degree) or np.isnan(r.detection_rate):
            continue
        groups.setdefault((r.family, r.gram_size, r.mode, r.classifier), []).append(
            (r.mean_degree, r.detection_rate))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("family", "gram_size", "mode", "classifier",
                     "c0", "c1", "c2", "n_points", "status"))
    for key in sorted(groups):
        points = groups[key]
        family, gram, mode, classifier = key
        try:
            c0, c1, c2 = fit_quadratic_trend(points)
            row = (family, str(gram), mode, classifier,
                   _fmt(c0), _fmt(c1), _fmt(c2), str(len(points)), "ok")
        except RankDeficientError:
            row = (family, str(gram), mode, classifier,
                   "nan", "nan", "nan", str(len(points)), "rank_deficient")
        writer.writerow(row)
    return buf.getvalue()


def _plot_family(family: str, rows: list[SweepResult], path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    grams = sorted({r.gram_size for r in rows})
    cmap = plt.get_cmap("viridis")
    for i, gram in enumerate(grams):
        pts = [(r.mean_degree, r.detection_rate) for r in rows
               if r.gram_size == gram and not np.isnan(r.detection_rate)]
        if not pts:
            continue
        color = cmap(i / max(1, len(grams) - 1))
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.scatter(xs, ys, s=12, alpha=0.6, color=color, label=f"n={gram}")
        try:
            c0, c1, c2 = fit_quadratic_trend(pts)
            grid = np.linspace(min(xs), max(xs), 200)
            ax.plot(grid, c0 + c1 * grid + c2 * grid * grid, color=color, linewidth=1.0)
        except RankDeficientError:
            pass
    ax.set_xlabel("mean obfuscation degree (edit distance)")
    ax.set_ylabel("detection rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(family)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(results: list[SweepResult], out_dir) -> list[str]:
    """Write results.csv, trends.csv and one scatter SVG per family.

    Returns the written paths. CSV bytes are deterministic for identical
    result lists.
    """
    if not results:
        raise EmptyInputError("no sweep results to report")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_results_csv(results))
    written.append(results_path)
    trends_path = os.path.join(out_dir, "trends.csv")
    with open(trends_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_trends_csv(results))
    written.append(trends_path)
    for family in (COMBINED, INSERTION_ONLY, REORDERING_ONLY):
        rows = [r for r in results if r.family == family and r.error is None]
        if not rows:
            continue
        plot_path = os.path.join(out_dir, f"scatter_{family}.svg")
        _plot_family(family, rows, plot_path)
        written.append(plot_path)
    return written
