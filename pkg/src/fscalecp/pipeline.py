"""Learning the local spreading-behaviour model from history cascades.

``learn`` chains the stages: instance construction, classifier choice by
cross-validation, floating backward feature selection over every target size
from half the features up to all of them, a refit on the winning subset, and
the per-mechanism weight summary.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol, Sequence

import numpy as np

from .cascade import CascadeState, Message
from .data import SocialData
from .features import FEATURE_NAMES, MECHANISM_NAMES, MECHANISM_OF, N_FEATURES, FeatureExtractor
from .learners import (COMPLEXITY_ORDER, KINDS, Classifier, Dataset, DimensionError, classifier_from_dict,
                       cross_val_accuracy, make_classifier)

logger = logging.getLogger(__name__)

MODEL_FORMAT = "fscalecp-model/1"


class Featurizer(Protocol):
    feature_names: Sequence[str]

    def __call__(self, state: CascadeState, nodes: Sequence[int], m: Message) -> np.ndarray: ...


class _FullFeatures:
    feature_names = FEATURE_NAMES

    def __init__(self, data: SocialData):
        self.extractor = FeatureExtractor(data)

    def __call__(self, state, nodes, m):
        return self.extractor.batch(state, nodes, m)


def build_instances(data: SocialData, seed: int = 0, featurizer: Featurizer | None = None,
                    max_instances: int | None = None, message_ids: Sequence[str] | None = None) -> Dataset:
    """Balanced positive / negative spreading instances from every cascade.

    A positive is an activation that had at least one activated parent; its
    features are taken just before it, with the clock at its own activation
    time. A negative is a node exposed to the message that never activated,
    featurised at the cascade's last timestamp. The larger class is
    subsampled (seeded) to the size of the smaller one. ``message_ids``
    restricts the cascades used (default: all).
    """
    feat = featurizer or _FullFeatures(data)
    g = data.graph
    pos_X, pos_meta, neg_X, neg_meta = [], [], [], []
    ids = list(data.corpus.cascades) if message_ids is None else list(message_ids)
    for mid in ids:
        cascade = data.corpus.cascades[mid]
        m = data.corpus.messages[mid]
        state = CascadeState(g, mid)
        events = cascade.events
        i = 0
        while i < len(events):
            t = events[i][1]
            j = i
            while j < len(events) and events[j][1] == t:
                j += 1
            group = [v for v, _ in events[i:j]]
            exposed = [v for v in group if state.ap_count[v] > 0]
            if exposed:
                state.now = t
                pos_X.append(feat(state, exposed, m))
                pos_meta.extend((mid, v, t) for v in exposed)
            state.activate(group, t)
            i = j
        if state.susceptible:
            state.now = state.last_time()
            negs = sorted(state.susceptible)
            neg_X.append(feat(state, negs, m))
            neg_meta.extend((mid, v, state.now) for v in negs)
    n_pos, n_neg = len(pos_meta), len(neg_meta)
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"need both classes: {n_pos} positive and {n_neg} negative instances")
    rng = np.random.default_rng(seed)
    keep = min(n_pos, n_neg)
    if max_instances is not None:
        keep = min(keep, max_instances // 2)
    pos_rows = np.sort(rng.choice(n_pos, size=keep, replace=False)) if keep < n_pos else np.arange(n_pos)
    neg_rows = np.sort(rng.choice(n_neg, size=keep, replace=False)) if keep < n_neg else np.arange(n_neg)
    X = np.vstack([np.vstack(pos_X)[pos_rows], np.vstack(neg_X)[neg_rows]])
    y = np.concatenate([np.ones(keep, np.int64), -np.ones(keep, np.int64)])
    meta = [pos_meta[i] for i in pos_rows] + [neg_meta[i] for i in neg_rows]
    logger.info("instances: %d positive, %d negative before balancing; kept %d each", n_pos, n_neg, keep)
    return Dataset(X, y, list(feat.feature_names), meta)


def model_select(candidates: Iterable[str], data: Dataset, folds: int = 10, seed: int = 0,
                 hyper: dict[str, dict] | None = None, tie: float = 0.005) -> tuple[str, dict[str, float]]:
    """Pick the kind with best CV accuracy, preferring simpler kinds within ``tie``."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    hyper = hyper or {}
    accs = {k: cross_val_accuracy(k, data, folds, seed, hyper.get(k)) for k in candidates}
    best = max(accs.values())
    near = [k for k, a in accs.items() if a >= best - tie]
    return min(near, key=lambda k: COMPLEXITY_ORDER.get(k, 99)), accs


class Criterion:
    """Cached cross-validated accuracy of one classifier kind on feature subsets."""

    def __init__(self, kind: str, data: Dataset, folds: int = 10, seed: int = 0,
                 hyper: dict[str, Any] | None = None):
        self.kind, self.data, self.folds, self.seed, self.hyper = kind, data, folds, seed, hyper
        self.cache: dict[frozenset[int], float] = {}

    def __call__(self, subset: Iterable[int]) -> float:
        key = frozenset(subset)
        if key not in self.cache:
            self.cache[key] = cross_val_accuracy(self.kind, self.data, self.folds, self.seed,
                                                 self.hyper, sorted(key))
        return self.cache[key]


def _argmax(options: Sequence[int], score: Callable[[int], float]) -> tuple[int, float]:
    best, best_j = options[0], -math.inf
    for x in options:
        j = score(x)
        if j > best_j:
            best, best_j = x, j
    return best, best_j


def sfbs(kind: str, data: Dataset, k: int, folds: int = 10, seed: int = 0,
         criterion: Criterion | None = None) -> tuple[int, ...]:
    """Sequential floating backward selection down to ``k`` features.

    Starting from every feature, each round excludes the feature whose
    removal scores best, then conditionally re-includes removed features
    while doing so beats the best subset seen at that size. The feature
    excluded in the current round is never the one re-included.
    """
    d = data.d
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    J = criterion or Criterion(kind, data, folds, seed)
    X = set(range(d))
    best = {d: J(X)}
    while len(X) > k:
        out, j_out = _argmax(sorted(X), lambda x: J(X - {x}))
        X.discard(out)
        best[len(X)] = max(best.get(len(X), -math.inf), j_out)
        if len(X) == k:
            break
        while len(X) < d:
            pool = sorted(set(range(d)) - X - {out})
            if not pool:
                break
            inc, j_in = _argmax(pool, lambda x: J(X | {x}))
            if j_in > best.get(len(X) + 1, -math.inf):
                X.add(inc)
                best[len(X)] = j_in
            else:
                break
    return tuple(sorted(X))


def mechanism_measure(weights: Sequence[float], selected: Sequence[int],
                      grouping: Sequence[str] = MECHANISM_OF,
                      names: Sequence[str] = MECHANISM_NAMES) -> np.ndarray:
    """Share of total feature weight carried by each mechanism."""
    w = np.asarray(weights, dtype=float)
    out = np.zeros(len(names))
    for wi, f in zip(w, selected):
        out[names.index(grouping[f])] += wi
    total = out.sum()
    return out / total if total > 0 else out


@dataclass
class LearnConfig:
    kinds: tuple[str, ...] = KINDS
    folds: int = 10
    seed: int = 0
    sfbs_folds: int | None = None
    max_instances: int | None = None
    hyper: dict[str, dict] = field(default_factory=dict)
    kind: str | None = None   # skip model selection when set
    message_ids: Sequence[str] | None = None


class TrainedModel:
    """Chosen classifier, selected feature subset and mechanism summary."""

    variant = "fscalecp"

    def __init__(self, classifier: Classifier, selected: Sequence[int], weights: Sequence[float],
                 mechanism: Sequence[float], provenance: dict[str, Any] | None = None):
        self.classifier = classifier
        self.selected = tuple(int(i) for i in selected)
        if not self.selected or not set(self.selected) <= set(range(N_FEATURES)):
            raise ValueError("selected feature set must be a non-empty subset of 0..17")
        self.weights = np.asarray(weights, dtype=float)
        self.mechanism = np.asarray(mechanism, dtype=float)
        self.provenance = dict(provenance or {})
        self._extractors: dict[int, FeatureExtractor] = {}

    def extractor(self, data: SocialData) -> FeatureExtractor:
        ex = self._extractors.get(id(data))
        if ex is None or ex.data is not data:
            ex = self._extractors[id(data)] = FeatureExtractor(data)
        return ex

    def activation_proba(self, data: SocialData, state: CascadeState, nodes: Sequence[int],
                         m: Message) -> np.ndarray:
        X = self.extractor(data).batch(state, nodes, m, self.selected)
        return np.atleast_1d(self.classifier.predict_proba(X))

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": MODEL_FORMAT,
            "variant": self.variant,
            "feature_names": list(FEATURE_NAMES),
            "mechanism_of": list(MECHANISM_OF),
            "selected": list(self.selected),
            "selected_names": [FEATURE_NAMES[i] for i in self.selected],
            "weights": self.weights.tolist(),
            "mechanism_measure": dict(zip(MECHANISM_NAMES, self.mechanism.tolist())),
            "classifier": self.classifier.to_dict(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainedModel":
        if list(d.get("feature_names", [])) != list(FEATURE_NAMES):
            raise DimensionError("model feature order does not match this build")
        mech = d["mechanism_measure"]
        clf = classifier_from_dict(d["classifier"])
        if clf.n_features != len(d["selected"]) or len(d["weights"]) != len(d["selected"]):
            raise DimensionError(f"classifier expects {clf.n_features} features, "
                                 f"model selects {len(d['selected'])}")
        return cls(clf, d["selected"], d["weights"], [mech[k] for k in MECHANISM_NAMES], d.get("provenance"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def learn(data: SocialData, config: LearnConfig | None = None, instances: Dataset | None = None) -> TrainedModel:
    cfg = config or LearnConfig()
    ds = instances if instances is not None else build_instances(data, cfg.seed, max_instances=cfg.max_instances,
                                                                     message_ids=cfg.message_ids)
    if cfg.kind is None:
        kind, accs = model_select(cfg.kinds, ds, cfg.folds, cfg.seed, cfg.hyper)
    else:
        kind, accs = cfg.kind, {}
    logger.info("model selection: %s (%s)", kind, accs)
    d = ds.d
    J = Criterion(kind, ds, cfg.sfbs_folds or cfg.folds, cfg.seed, cfg.hyper.get(kind))
    best_set, best_j = None, -math.inf
    for size in range(math.ceil(d / 2), d + 1):
        subset = sfbs(kind, ds, size, criterion=J)
        j = J(subset)
        # strict '>' keeps the smaller subset on ties (sizes ascend)
        if j > best_j:
            best_set, best_j = subset, j
    clf = make_classifier(kind, **cfg.hyper.get(kind, {})).fit(ds.X[:, list(best_set)], ds.y, seed=cfg.seed)
    fw = clf.feature_weights()
    mech = mechanism_measure(fw, best_set)
    provenance = {
        "seed": cfg.seed,
        "folds": cfg.folds,
        "sfbs_folds": cfg.sfbs_folds or cfg.folds,
        "n_instances": len(ds),
        "candidate_accuracy": accs,
        "selected_accuracy": best_j,
        "all_features_accuracy": J(range(d)),
        "weight_table": sorted(
            ({"feature": FEATURE_NAMES[f], "mechanism": MECHANISM_OF[f], "weight": float(w)}
             for f, w in zip(best_set, fw)), key=lambda r: -r["weight"]),
    }
    return TrainedModel(clf, best_set, fw, mech, provenance)
