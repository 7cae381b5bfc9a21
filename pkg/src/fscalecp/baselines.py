"""Comparison methods: the LRC-Q ego-network classifiers and CG-CPred.

LRC-Q variants summarise a node's ego network with two numbers, a pairwise
influence ``g`` (random-walk-with-restart mass on active neighbours) and a
structure influence ``f`` (decaying in the number of connected groups the
active neighbours form), and feed them to logistic regression. Both plug
into the propagation engine through ``activation_proba``.

CG-CPred regresses the log final size of a cascade on features of its early
cascade graph.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .cascade import CascadeState, Message
from .data import SocialData
from .graph import SocialGraph
from .learners import Dataset, LogisticRegression, classifier_from_dict, cross_val_accuracy

LRCQ_VARIANTS = ("lrcq1", "lrcq2")


@dataclass
class Ego:
    """Ego network of ``v``: members (``v`` first), undirected local edges, RWR scores."""

    nodes: np.ndarray
    edges: np.ndarray   # local index pairs, each undirected edge once
    prob: np.ndarray


def ego_network(g: SocialGraph, v: int) -> tuple[np.ndarray, np.ndarray]:
    members = np.union1d(g.parents(v), g.children(v))
    nodes = np.concatenate([[v], members]).astype(np.int64)
    local = {int(u): i for i, u in enumerate(nodes)}
    pairs = set()
    for u in nodes.tolist():
        for p in g.parents(u).tolist():
            j = local.get(p)
            if j is not None:
                a, b = local[u], j
                pairs.add((min(a, b), max(a, b)))
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return nodes, edges


def transition_matrix(n: int, edges: np.ndarray, restart_at: int = 0) -> np.ndarray:
    """Row-stochastic walk on an undirected edge list; dangling rows jump to ``restart_at``."""
    A = np.zeros((n, n))
    if len(edges):
        A[edges[:, 0], edges[:, 1]] = 1.0
        A[edges[:, 1], edges[:, 0]] = 1.0
    deg = A.sum(axis=1)
    W = np.divide(A, deg[:, None], out=np.zeros_like(A), where=deg[:, None] > 0)
    W[deg == 0, restart_at] = 1.0
    return W


def rwr(g: SocialGraph, v: int, restart: float = 0.15, iters: int = 1000, tol: float = 1e-10) -> dict[int, float]:
    """Random walk with restart at ``v`` on ``v``'s ego network, by power iteration."""
    if not 0 < restart < 1:
        raise ValueError("restart must be in (0, 1)")
    nodes, edges = ego_network(g, v)
    p = _rwr_local(len(nodes), edges, restart, iters, tol)
    return {int(u): float(x) for u, x in zip(nodes, p)}


def _rwr_local(n: int, edges: np.ndarray, restart: float, iters: int, tol: float) -> np.ndarray:
    W = transition_matrix(n, edges)
    e = np.zeros(n)
    e[0] = 1.0
    p = e.copy()
    for _ in range(iters):
        nxt = restart * e + (1 - restart) * (W.T @ p)
        done = np.abs(nxt - p).max() < tol
        p = nxt
        if done:
            break
    return p


@dataclass
class EgoContext:
    v: int
    active: list[int]
    rwr_prob: dict[int, float]
    time_diff: dict[int, float]
    groups: int = 0   # connected components among the active neighbours

    def __post_init__(self) -> None:
        if any(p < 0 for p in self.rwr_prob.values()):
            raise ValueError("negative random-walk probability")


def _count_groups(n_active: int, edges: Sequence[tuple[int, int]]) -> int:
    parent = list(range(n_active))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    groups = n_active
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            groups -= 1
    return groups


def lrcq1_features(ctx: EgoContext, mu: float = 1.0) -> tuple[float, float]:
    g_val = float(sum(ctx.rwr_prob[u] for u in ctx.active))
    return g_val, math.exp(-mu * ctx.groups)


def lrcq2_features(ctx: EgoContext, mu: float = 1.0, a: float = 0.5, b: float = 0.5,
                   decay_scale: float | None = None) -> tuple[float, float]:
    """``g = sum h*p`` (or ``sum exp(-h/scale)*p`` with a decay scale), ``f = a log(|S|+1) + b e^{-mu C}``."""
    if any(h < 0 for h in ctx.time_diff.values()):
        raise ValueError("time differences must be non-negative")
    if decay_scale is None:
        g_val = sum(ctx.time_diff[u] * ctx.rwr_prob[u] for u in ctx.active)
    else:
        g_val = sum(math.exp(-ctx.time_diff[u] / decay_scale) * ctx.rwr_prob[u] for u in ctx.active)
    f_val = a * math.log(len(ctx.active) + 1) + b * math.exp(-mu * ctx.groups)
    return float(g_val), f_val


class EgoFeaturizer:
    """Computes ``(g, f)`` for batches of nodes, caching each ego network's RWR."""

    feature_names = ("g", "f")

    def __init__(self, graph: SocialGraph, variant: str = "lrcq1", restart: float = 0.15,
                 mu: float = 1.0, a: float = 0.5, b: float = 0.5, decay_scale: float | None = None):
        if variant not in LRCQ_VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.graph, self.variant = graph, variant
        self.restart, self.mu, self.a, self.b, self.decay_scale = restart, mu, a, b, decay_scale
        self._egos: dict[int, Ego] = {}
        self._memo: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()

    def ego(self, v: int) -> Ego:
        e = self._egos.get(v)
        if e is None:
            nodes, edges = ego_network(self.graph, v)
            e = self._egos[v] = Ego(nodes, edges, _rwr_local(len(nodes), edges, self.restart, 1000, 1e-10))
        return e

    def context(self, state: CascadeState, v: int) -> EgoContext:
        e = self.ego(v)
        act = state.activated[e.nodes]
        act[0] = False
        local = np.nonzero(act)[0]
        active = e.nodes[local].tolist()
        keep = act[e.edges[:, 0]] & act[e.edges[:, 1]] if len(e.edges) else np.zeros(0, bool)
        remap = {int(j): i for i, j in enumerate(local)}
        sub = [(remap[int(x)], remap[int(y)]) for x, y in e.edges[keep]]
        return EgoContext(
            v, active,
            {u: float(e.prob[j]) for u, j in zip(active, local)},
            {u: float(state.now - state.act_time[u]) for u in active},
            _count_groups(len(active), sub),
        )

    def features(self, ctx: EgoContext) -> tuple[float, float]:
        if self.variant == "lrcq1":
            return lrcq1_features(ctx, self.mu)
        return lrcq2_features(ctx, self.mu, self.a, self.b, self.decay_scale)

    def __call__(self, state: CascadeState, nodes: Sequence[int], m: Message | None = None) -> np.ndarray:
        """Batch ``(g, f)``; equal to ``features(context(...))`` per node up to summation order."""
        nodes = [int(v) for v in nodes]
        if not nodes:
            return np.zeros((0, 2))
        egos = [self.ego(v) for v in nodes]
        sizes = np.array([len(e.nodes) - 1 for e in egos])
        members = np.concatenate([e.nodes[1:] for e in egos])
        prob = np.concatenate([e.prob[1:] for e in egos])
        row = np.repeat(np.arange(len(nodes)), sizes)
        act = state.activated[members]
        n_active = np.bincount(row, weights=act, minlength=len(nodes)).astype(np.int64)
        if self.variant == "lrcq1":
            w = act.astype(float)
        else:
            h = np.where(act, state.now - np.where(act, state.act_time[members], 0.0), 0.0)
            if (h < 0).any():
                raise ValueError("time differences must be non-negative")
            w = np.where(act, h if self.decay_scale is None else np.exp(-h / self.decay_scale), 0.0)
        g_val = np.bincount(row, weights=w * prob, minlength=len(nodes))
        groups = self._group_counts(state, nodes, n_active)
        f_val = np.exp(-self.mu * groups)
        if self.variant == "lrcq2":
            f_val = self.a * np.log(n_active + 1.0) + self.b * f_val
        return np.column_stack([g_val, f_val])

    def _group_counts(self, state: CascadeState, nodes: list[int], n_active: np.ndarray) -> np.ndarray:
        # activation is monotone within one state, so an unchanged active-neighbour count
        # means an unchanged active-neighbour set
        memo = self._memo.get(state)
        if memo is None:
            memo = self._memo[state] = {}
        out = np.empty(len(nodes))
        for i, (v, k) in enumerate(zip(nodes, n_active.tolist())):
            hit = memo.get(v)
            if hit is None or hit[0] != k:
                hit = memo[v] = (k, self.context(state, v).groups if k else 0)
            out[i] = hit[1]
        return out

    def params(self) -> dict[str, Any]:
        return {"restart": self.restart, "mu": self.mu, "a": self.a, "b": self.b,
                "decay_scale": self.decay_scale}


class LrcqModel:
    """Logistic regression over the two ego features; hostable by the engine."""

    def __init__(self, variant: str, classifier: LogisticRegression, params: dict[str, Any],
                 provenance: dict[str, Any] | None = None):
        self.variant = variant
        self.classifier = classifier
        self.params = dict(params)
        self.provenance = dict(provenance or {})
        self._featurizers: dict[int, EgoFeaturizer] = {}

    def featurizer(self, graph: SocialGraph) -> EgoFeaturizer:
        f = self._featurizers.get(id(graph))
        if f is None or f.graph is not graph:
            f = self._featurizers[id(graph)] = EgoFeaturizer(graph, self.variant, **self.params)
        return f

    def activation_proba(self, data: SocialData, state: CascadeState, nodes: Sequence[int],
                         m: Message) -> np.ndarray:
        X = self.featurizer(state.graph)(state, nodes, m)
        return np.atleast_1d(self.classifier.predict_proba(X))

    def to_dict(self) -> dict[str, Any]:
        return {"format": "fscalecp-model/1", "variant": self.variant,
                "feature_names": list(EgoFeaturizer.feature_names), "params": self.params,
                "classifier": self.classifier.to_dict(), "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LrcqModel":
        return cls(d["variant"], classifier_from_dict(d["classifier"]), d["params"], d.get("provenance"))


def lrcq_train(variant: str, data: SocialData, seed: int = 0, folds: int = 10,
               instances: Dataset | None = None, max_instances: int | None = None,
               message_ids: Sequence[str] | None = None, **params) -> LrcqModel:
    """Train an LRC-Q baseline on the same instance construction as the main model."""
    from .pipeline import build_instances

    feat = EgoFeaturizer(data.graph, variant, **params)
    ds = instances if instances is not None else build_instances(data, seed, feat, max_instances, message_ids)
    clf = LogisticRegression().fit(ds.X, ds.y, seed=seed)
    acc = cross_val_accuracy("logreg", ds, folds, seed)
    return LrcqModel(variant, clf, feat.params(), {"seed": seed, "folds": folds, "cv_accuracy": acc,
                                                   "n_instances": len(ds)})


CG_FEATURES = ("bias", "log_size", "log_depth", "log_gap", "log_frontier", "log_contlen", "keyword", "log_surt")


def cascade_depths(state: CascadeState) -> dict[int, int]:
    """Depth of each activated node: 0 without earlier active parents, else 1 + shallowest one."""
    depth: dict[int, int] = {}
    g = state.graph
    for v, t in state.events:
        ds = [depth[p] for p in g.parents(v).tolist() if p in depth and state.act_time[p] < t]
        depth[v] = 1 + min(ds) if ds else 0
    return depth


def cascade_graph_features(state: CascadeState, m: Message) -> np.ndarray:
    if state.size < 2:
        raise ValueError("cascade graph features need at least 2 observed events")
    times = [t for _, t in state.events]
    gap = (times[-1] - times[0]) / (len(times) - 1)
    depth = max(cascade_depths(state).values())
    return np.array([1.0, math.log(state.size), math.log1p(depth), math.log1p(gap),
                     math.log1p(len(state.susceptible)), math.log1p(m.content_length),
                     float(m.has_keyword), math.log1p(max(times[-1] - m.origin_time, 0.0))])


@dataclass
class CGCPred:
    """Log-linear final-size regression on early cascade-graph features."""

    coef: np.ndarray = field(default_factory=lambda: np.zeros(len(CG_FEATURES)))
    ridge: float = 1e-8

    def fit_features(self, F: np.ndarray, final_sizes: Sequence[float]) -> "CGCPred":
        F = np.asarray(F, dtype=float)
        y = np.log(np.asarray(final_sizes, dtype=float))
        A = F.T @ F + self.ridge * np.eye(F.shape[1])
        self.coef = np.linalg.solve(A, F.T @ y)
        return self

    def fit(self, data: SocialData, fractions: Sequence[float], message_ids: Sequence[str] | None = None) -> "CGCPred":
        rows, targets = [], []
        ids = message_ids if message_ids is not None else list(data.corpus.cascades)
        for mid in ids:
            c = data.corpus.cascades[mid]
            if len(c) < 2:
                continue
            for p in fractions:
                k = min(len(c), max(2, math.ceil(round(p * len(c), 9))))
                state = CascadeState.from_events(data.graph, mid, c.events[:k])
                rows.append(cascade_graph_features(state, data.corpus.messages[mid]))
                targets.append(len(c))
        if not rows:
            raise ValueError("no training cascade has 2 or more events")
        return self.fit_features(np.array(rows), targets)

    def predict_features(self, F: np.ndarray) -> np.ndarray:
        return np.exp(np.asarray(F, dtype=float) @ self.coef)

    def predict(self, observed: CascadeState, m: Message) -> int:
        est = float(self.predict_features(cascade_graph_features(observed, m)[None, :])[0])
        return max(observed.size, int(round(est)))


def cg_cpred(observed: CascadeState, data: SocialData, fractions: Sequence[float] = (0.05, 0.1, 0.15, 0.2),
             model: CGCPred | None = None) -> int:
    model = model or CGCPred().fit(data, fractions,
                                   [mid for mid in data.corpus.cascades if mid != observed.message_id])
    return model.predict(observed, data.corpus.messages[observed.message_id])
