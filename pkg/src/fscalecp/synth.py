"""Synthetic networks, profiles, messages and ground-truth cascades.

Cascades grow in synchronous rounds separated by exponential delays. In
each round the newly exposed susceptible nodes are scored by a planted rule
against the state of the previous rounds; the nodes that fire are activated
together, timestamped with the round time.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .cascade import Cascade, CascadeState, Message, UserProfile
from .data import SocialData
from .features import FEATURE_INDEX, FeatureExtractor
from .graph import SocialGraph
from .learners import sigmoid
from .propagation import ThresholdRule

DAY = 86400.0

# Raw-scale coefficients. Interest mismatch decides on its own whether an
# exposed user passes the message on; a keyword widens the accepted range.
# Steep enough that almost every trial is a near-certain yes or no, so the
# audience of a message is a property of the users and not of timing.
DEFAULT_COEF: dict[str, float] = {
    "KeyW_m": 60.0,
    "IntSim_m": -300.0,
}
DEFAULT_BIAS = 450.0


def gen_network(n: int, m_per_node: int = 3, reciprocity: float = 0.3, seed: int = 0) -> SocialGraph:
    """Directed preferential attachment: each new node follows ``m_per_node`` earlier nodes.

    Targets are drawn with probability proportional to follower count + 1;
    each follow is returned with probability ``reciprocity``.
    """
    if n < 2 or m_per_node < 1 or not 0 <= reciprocity <= 1:
        raise ValueError("need n >= 2, m_per_node >= 1 and reciprocity in [0, 1]")
    rng = np.random.default_rng(seed)
    followers = np.zeros(n)
    edges = []
    for u in range(1, n):
        k = min(m_per_node, u)
        w = followers[:u] + 1.0
        targets = rng.choice(u, size=k, replace=False, p=w / w.sum())
        back = rng.random(k) < reciprocity
        for t, r in zip(targets.tolist(), back.tolist()):
            edges.append((u, t))
            followers[t] += 1
            if r:
                edges.append((t, u))
                followers[u] += 1
    return SocialGraph.from_edges(n, edges, [f"u{i}" for i in range(n)])


class PlantedLogistic:
    """Logistic activation rule over raw feature values."""

    variant = "planted-logistic"

    def __init__(self, coef: dict[str, float] | None = None, bias: float = DEFAULT_BIAS):
        self.coef = dict(DEFAULT_COEF if coef is None else coef)
        self.bias = bias
        self.columns = [FEATURE_INDEX[name] for name in self.coef]
        self.weights = np.array(list(self.coef.values()), dtype=float)
        self._extractors: dict[int, FeatureExtractor] = {}

    def activation_proba(self, data: SocialData, state: CascadeState, nodes, m: Message) -> np.ndarray:
        ex = self._extractors.get(id(data))
        if ex is None or ex.data is not data:
            ex = self._extractors[id(data)] = FeatureExtractor(data)
        if not self.columns:
            return np.full(len(nodes), float(sigmoid(self.bias)))
        X = ex.batch(state, nodes, m, self.columns)
        return sigmoid(X @ self.weights + self.bias)

    def to_dict(self) -> dict[str, Any]:
        return {"format": "fscalecp-model/1", "variant": self.variant, "coef": self.coef, "bias": self.bias}


def gen_messages(n_messages: int, n_topics: int, rng: np.random.Generator,
                 topic_alpha: float = 0.3, keyword_rate: float = 0.3) -> list[Message]:
    out = []
    for i in range(n_messages):
        topic = rng.dirichlet(np.full(n_topics, topic_alpha))
        topic = topic / topic.sum()
        out.append(Message(f"m{i}", int(rng.integers(5, 141)), bool(rng.random() < keyword_rate),
                           tuple(float(x) for x in topic), 0.0))
    return out


def gen_profiles(n: int, n_topics: int, rng: np.random.Generator, interest_alpha: float = 0.5,
                 verified_rate: float = 0.05) -> list[UserProfile]:
    out = []
    for v in range(n):
        interest = rng.dirichlet(np.full(n_topics, interest_alpha))
        interest = interest / interest.sum()
        out.append(UserProfile(v, bool(rng.random() < verified_rate),
                               -float(rng.uniform(30, 3 * 365)) * DAY,
                               tuple(float(x) for x in interest)))
    return out


def grow_cascade(data: SocialData, m: Message, seeds: Sequence[int], rule, rng: np.random.Generator,
                 horizon: float = 5 * DAY, mean_delay: float = 600.0, deterministic: bool = False) -> Cascade:
    """Grow one cascade from ``seeds`` at ``m.origin_time`` under ``rule``.

    A susceptible node is scored once per exposure: in the first round after
    it gains an activated parent. Without new exposures the cascade ends.
    """
    state = CascadeState(data.graph, m.message_id)
    now = m.origin_time
    state.activate(sorted(int(s) for s in seeds), now)
    seen = np.zeros(data.graph.n, dtype=np.int64)   # active-parent count at the last trial
    while True:
        sus = np.array(sorted(state.susceptible), dtype=np.int64)
        sus = sus[state.ap_count[sus] != seen[sus]] if len(sus) else sus
        if not len(sus):
            break
        now += rng.exponential(mean_delay)
        if now - m.origin_time > horizon:
            break
        state.now = now
        seen[sus] = state.ap_count[sus]
        p = np.asarray(rule.activation_proba(data, state, sus, m), dtype=float)
        fire = p > 0.5 if deterministic else rng.random(len(sus)) < p
        if fire.any():
            state.activate(sus[fire].tolist(), now)
    return state.cascade


def gen_corpus(g: SocialGraph, n_messages: int, n_topics: int = 10, planted=None, seed: int = 0,
               n_seeds: int = 1, horizon: float = 5 * DAY, mean_delay: float = 600.0,
               test_frac: float = 0.3, manifest: dict[str, Any] | None = None) -> SocialData:
    """Messages, profiles and cascades generated under a planted rule.

    ``planted`` is a :class:`PlantedLogistic` (stochastic rounds) or a
    :class:`~fscalecp.propagation.ThresholdRule` (deterministic rounds);
    default is ``PlantedLogistic()``. A seeded ``test_frac`` share of the
    messages is recorded as the held-out split in the manifest.
    """
    if not 0 <= test_frac < 1:
        raise ValueError("test_frac must be in [0, 1)")
    planted = planted if planted is not None else PlantedLogistic()
    deterministic = isinstance(planted, ThresholdRule)
    rng = np.random.default_rng(seed)
    messages = gen_messages(n_messages, n_topics, rng)
    profiles = gen_profiles(g.n, n_topics, rng)
    scratch = SocialData.build(g, [], messages, profiles)
    cascades = []
    for m in messages:
        seeds = rng.choice(g.n, size=min(n_seeds, g.n), replace=False)
        cascades.append(grow_cascade(scratch, m, seeds, planted, rng, horizon, mean_delay, deterministic))
    held = set(rng.permutation(n_messages)[:int(round(test_frac * n_messages))].tolist())
    split = {"train": [m.message_id for i, m in enumerate(messages) if i not in held],
             "test": [m.message_id for i, m in enumerate(messages) if i in held]}
    info = {"generator": "fscalecp.synth", "n_nodes": g.n, "n_edges": g.n_edges, "n_messages": n_messages,
            "n_topics": n_topics, "seed": seed, "n_seeds": n_seeds, "horizon": horizon,
            "mean_delay": mean_delay, "planted": planted.to_dict(), "split": split}
    info.update(manifest or {})
    return SocialData.build(g, cascades, messages, profiles, info)


def synth(n_nodes: int = 1000, n_messages: int = 200, seed: int = 0, m_per_node: int = 3,
          reciprocity: float = 0.3, n_topics: int = 10, planted=None, n_seeds: int = 1,
          test_frac: float = 0.3) -> SocialData:
    """Network plus corpus in one call, both derived from ``seed``."""
    net_seed, corpus_seed = np.random.SeedSequence(seed).generate_state(2)
    g = gen_network(n_nodes, m_per_node, reciprocity, int(net_seed))
    return gen_corpus(g, n_messages, n_topics, planted, int(corpus_seed), n_seeds, test_frac=test_frac,
                      manifest={"m_per_node": m_per_node, "reciprocity": reciprocity, "root_seed": seed})


def size_summary(data: SocialData) -> dict[str, float]:
    sizes = np.array([len(c) for c in data.corpus.cascades.values()])
    return {"count": int(len(sizes)), "mean": float(sizes.mean()), "median": float(np.median(sizes)),
            "max": int(sizes.max()), "p90": float(np.quantile(sizes, 0.9)),
            "singletons": int((sizes == 1).sum())}
