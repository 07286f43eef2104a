"""Baseline detectors over bag-of-token features, plus the detection rate.

Two deliberately cheap, deterministic baselines:
  * naive_bayes: multinomial likelihoods with add-one smoothing over the
    training vocabulary plus a single out-of-vocabulary bucket
  * nearest_centroid: cosine distance to per-class mean vectors of
    L1-normalized token counts

Obfuscated test traces contain tokens never seen in clean training; the
OOV bucket is where that probability mass goes. Ties are resolved toward
goodware so detection numbers never benefit from coin flips.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog
from .errors import (ConfigMismatchError, DegenerateTrainingError,
                     EmptyInputError, IoError, ParamError, ParseError)
from .features import FeatureConfig, FeatureVector, pack_bits, packable
from .trace import GOODWARE, LABELS, MALWARE

NAIVE_BAYES = "naive_bayes"
NEAREST_CENTROID = "nearest_centroid"
ALGORITHMS = (NAIVE_BAYES, NEAREST_CENTROID)

Token = tuple[str, ...]


@dataclass
class TrainedModel:
    algorithm: str
    config: FeatureConfig
    vocabulary: tuple[Token, ...]
    # naive_bayes
    log_prior: dict[str, float] = field(default_factory=dict)
    token_log_prob: dict[str, np.ndarray] = field(default_factory=dict)
    oov_log_prob: dict[str, float] = field(default_factory=dict)
    # nearest_centroid
    centroids: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self._index = {tok: i for i, tok in enumerate(self.vocabulary)}

    def token_index(self, token: Token) -> int | None:
        return self._index.get(token)


def _class_counts(features, vocabulary_index):
    """Per-label token count matrix rows plus per-label trace counts."""
    counts = {label: np.zeros(len(vocabulary_index), dtype=np.float64) for label in LABELS}
    n_traces = {label: 0 for label in LABELS}
    per_trace = []
    for fv, label in features:
        if label not in LABELS:
            raise DegenerateTrainingError(f"unknown label {label!r}")
        vec = np.zeros(len(vocabulary_index), dtype=np.float64)
        for tok, cnt in fv.tokens.items():
            vec[vocabulary_index[tok]] = cnt
        counts[label] += vec
        n_traces[label] += 1
        per_trace.append((vec, label))
    return counts, n_traces, per_trace


def train(features, algorithm: str, config: FeatureConfig | None = None) -> TrainedModel:
    """Fit a model on (FeatureVector, label) pairs.

    The vocabulary is the sorted union of training tokens; training is
    deterministic. Raises DegenerateTrainingError unless both classes are
    present, and ConfigMismatchError if token arities disagree. `config`
    records which featurization produced the inputs; when omitted, n is
    inferred from token arity and the mode defaults to ordered (the two
    modes are indistinguishable from the bags themselves).
    """
    if algorithm not in ALGORITHMS:
        raise ParamError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    features = list(features)
    if not features:
        raise DegenerateTrainingError("no training samples")
    arities = {len(tok) for fv, _ in features for tok in fv.tokens}
    if len(arities) > 1:
        raise ConfigMismatchError(f"mixed token arities in training data: {sorted(arities)}")
    n = next(iter(arities)) if arities else 2
    if config is None:
        config = FeatureConfig(n=n, mode="ordered")
    elif arities and config.n != n:
        raise ConfigMismatchError(f"training tokens are {n}-grams, config says n={config.n}")
    vocabulary = tuple(sorted({tok for fv, _ in features for tok in fv.tokens}))
    index = {tok: i for i, tok in enumerate(vocabulary)}
    counts, n_traces, per_trace = _class_counts(features, index)
    missing = [label for label in LABELS if n_traces[label] == 0]
    if missing:
        raise DegenerateTrainingError(f"no training samples labeled {missing}")

    model = TrainedModel(algorithm=algorithm, config=config, vocabulary=vocabulary)
    total = sum(n_traces.values())
    if algorithm == NAIVE_BAYES:
        v_plus_oov = len(vocabulary) + 1
        for label in LABELS:
            model.log_prior[label] = math.log(n_traces[label] / total)
            denom = counts[label].sum() + v_plus_oov
            model.token_log_prob[label] = np.log((counts[label] + 1.0) / denom)
            model.oov_log_prob[label] = math.log(1.0 / denom)
    else:
        for label in LABELS:
            acc = np.zeros(len(vocabulary), dtype=np.float64)
            for vec, lab in per_trace:
                if lab != label:
                    continue
                s = vec.sum()
                acc += vec / s if s > 0 else vec
            model.centroids[label] = acc / n_traces[label]
    return model


def _check_arity(model: TrainedModel, feature: FeatureVector) -> None:
    bad = [tok for tok in feature.tokens if len(tok) != model.config.n]
    if bad:
        raise ConfigMismatchError(
            f"feature {feature.trace_id!r} has {len(bad[0])}-grams, "
            f"model expects n={model.config.n}")


def predict(model: TrainedModel, feature: FeatureVector) -> tuple[str, float]:
    """(label, margin) for one feature vector.

    The margin is positive when the malware class wins: log-posterior
    difference for naive_bayes, cosine-distance difference for
    nearest_centroid. Exact ties go to goodware.
    """
    _check_arity(model, feature)
    if model.algorithm == NAIVE_BAYES:
        scores = {}
        for label in LABELS:
            logp = model.token_log_prob[label]
            oov = model.oov_log_prob[label]
            s = model.log_prior[label]
            for tok, cnt in feature.tokens.items():
                idx = model.token_index(tok)
                s += cnt * (logp[idx] if idx is not None else oov)
            scores[label] = s
        margin = scores[MALWARE] - scores[GOODWARE]
    else:
        vec = np.zeros(len(model.vocabulary), dtype=np.float64)
        for tok, cnt in feature.tokens.items():
            idx = model.token_index(tok)
            if idx is not None:
                vec[idx] = cnt
        dist = {label: _cosine_distance(vec, model.centroids[label]) for label in LABELS}
        margin = dist[GOODWARE] - dist[MALWARE]
    return (MALWARE if margin > 0 else GOODWARE), float(margin)


def _cosine_distance(x: np.ndarray, y: np.ndarray) -> float:
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return 1.0
    return 1.0 - float(np.dot(x, y)) / (nx * ny)


def detection_rate(model: TrainedModel, malware_features) -> float:
    """Fraction of the given features the model labels malware."""
    malware_features = list(malware_features)
    if not malware_features:
        raise EmptyInputError("detection rate over an empty feature list")
    hits = sum(1 for fv in malware_features if predict(model, fv)[0] == MALWARE)
    return hits / len(malware_features)


# -- serialization ------------------------------------------------------------

def save_model(model: TrainedModel, path) -> None:
    doc = {
        "algorithm": model.algorithm,
        "config": {"n": model.config.n, "mode": model.config.mode},
        "vocabulary": [list(tok) for tok in model.vocabulary],
    }
    if model.algorithm == NAIVE_BAYES:
        doc["log_prior"] = model.log_prior
        doc["token_log_prob"] = {k: v.tolist() for k, v in model.token_log_prob.items()}
        doc["oov_log_prob"] = model.oov_log_prob
    else:
        doc["centroids"] = {k: v.tolist() for k, v in model.centroids.items()}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    try:
        model = TrainedModel(
            algorithm=doc["algorithm"],
            config=FeatureConfig(n=doc["config"]["n"], mode=doc["config"]["mode"]),
            vocabulary=tuple(tuple(tok) for tok in doc["vocabulary"]),
        )
        if model.algorithm == NAIVE_BAYES:
            model.log_prior = {k: float(v) for k, v in doc["log_prior"].items()}
            model.token_log_prob = {k: np.asarray(v, dtype=np.float64)
                                    for k, v in doc["token_log_prob"].items()}
            model.oov_log_prob = {k: float(v) for k, v in doc["oov_log_prob"].items()}
        elif model.algorithm == NEAREST_CENTROID:
            model.centroids = {k: np.asarray(v, dtype=np.float64)
                               for k, v in doc["centroids"].items()}
        else:
            raise ParseError(f"{path}: unknown algorithm {model.algorithm!r}")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed model file: {exc}") from exc
    return model


# -- packed fast path ---------------------------------------------------------

class PackedScorer:
    """Vectorized predictor over packed int64 tokens; reproduces predict().

    Built once per model against a catalog; test traces then score through
    searchsorted lookups instead of per-token dict probes.
    """

    def __init__(self, model: TrainedModel, catalog: Catalog):
        n = model.config.n
        if not packable(len(catalog.alphabet), n):
            raise ParamError("vocabulary is not packable for this alphabet and n")
        self.model = model
        bits = pack_bits(len(catalog.alphabet))
        packed = np.empty(len(model.vocabulary), dtype=np.int64)
        for i, tok in enumerate(model.vocabulary):
            value = 0
            for name in tok:
                value = (value << bits) | catalog.code_of(name)
            packed[i] = value
        order = np.argsort(packed, kind="stable")
        self.sorted_tokens = packed[order]
        if model.algorithm == NAIVE_BAYES:
            self.logp = {label: model.token_log_prob[label][order] for label in LABELS}
        else:
            self.centroid = {label: model.centroids[label][order] for label in LABELS}
            self.centroid_norm = {label: float(np.linalg.norm(model.centroids[label]))
                                  for label in LABELS}

    def _lookup(self, tokens: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if len(self.sorted_tokens) == 0:
            return np.zeros(len(tokens), dtype=bool), np.zeros(len(tokens), dtype=np.int64)
        pos = np.minimum(np.searchsorted(self.sorted_tokens, tokens),
                         len(self.sorted_tokens) - 1)
        known = self.sorted_tokens[pos] == tokens
        return known, pos

    def margin(self, tokens: np.ndarray, counts: np.ndarray) -> float:
        model = self.model
        if model.algorithm == NAIVE_BAYES:
            known, pos = self._lookup(tokens)
            cnt = counts.astype(np.float64)
            oov_total = float(cnt[~known].sum())
            scores = {}
            for label in LABELS:
                s = model.log_prior[label] + oov_total * model.oov_log_prob[label]
                s += float(np.dot(cnt[known], self.logp[label][pos[known]]))
                scores[label] = s
            return scores[MALWARE] - scores[GOODWARE]
        known, pos = self._lookup(tokens)
        cnt = counts[known].astype(np.float64)
        norm_x = float(np.linalg.norm(cnt))
        dist = {}
        for label in LABELS:
            denom = norm_x * self.centroid_norm[label]
            if denom == 0.0:
                dist[label] = 1.0
            else:
                dist[label] = 1.0 - float(np.dot(cnt, self.centroid[label][pos[known]])) / denom
        return dist[GOODWARE] - dist[MALWARE]

    def predict(self, tokens: np.ndarray, counts: np.ndarray) -> tuple[str, float]:
        margin = self.margin(tokens, counts)
        return (MALWARE if margin > 0 else GOODWARE), float(margin)
