"""The 18 spreading-behaviour features, grouped into four driving mechanisms.

CSM  content semantics      KeyW, ContLen, IntDiv, IntSim
TAM  temporal activity      AvgExpT, SurT, AvgFordD
SCM  surrounding conditions SocialRe(R), ActRecRel(R), RecRel(R)
EM   endogenous             VerSta, ReMsg, ChlNode, AccCreT, CPNodesR

Two code paths compute them. :func:`extract_batch` reads the incremental
counters kept by :class:`~fscalecp.cascade.CascadeState` and is what training
and propagation use. The scalar helpers (:func:`temporal_features`,
:func:`structural_features`, :func:`extract`) recount from neighbourhoods and
serve as the reference the batch path is tested against.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .cascade import CascadeState, Message, activated_parents
from .data import SocialData
from .graph import SocialGraph

FEATURE_NAMES: tuple[str, ...] = (
    "KeyW_m", "ContLen_m", "IntDiv_u", "IntSim_m",
    "AvgExpT_m", "SurT_m", "AvgFordD_m",
    "SocialRe_u", "SocialReR_u", "ActRecRel_u", "ActRecRelR_u", "RecRel_u", "RecRelR_u",
    "VerSta_u", "ReMsg_u", "ChlNode_u", "AccCreT_u", "CPNodesR_u",
)
MECHANISM_NAMES: tuple[str, ...] = ("CSM", "TAM", "SCM", "EM")
MECHANISM_OF: tuple[str, ...] = ("CSM",) * 4 + ("TAM",) * 3 + ("SCM",) * 6 + ("EM",) * 5
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
N_FEATURES = len(FEATURE_NAMES)
RATIO_FEATURES = ("SocialReR_u", "ActRecRelR_u", "RecRelR_u")

SMOOTHING = 1e-9


def interest_diversity(p: Sequence[float]) -> float:
    """Shannon entropy in nats; zero entries contribute nothing."""
    p = np.asarray(p, dtype=float)
    if (p < 0).any():
        raise ValueError("probability vector has negative entries")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _smooth(p: np.ndarray, eps: float) -> np.ndarray:
    p = p + eps
    return p / p.sum(axis=-1, keepdims=True)


def interest_similarity(interest: Sequence[float], topic: Sequence[float], eps: float = SMOOTHING) -> float:
    """Symmetrised KL divergence ``(D(I||T) + D(T||I)) / 2`` after epsilon smoothing."""
    a = np.asarray(interest, dtype=float)
    b = np.asarray(topic, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    a, b = _smooth(a, eps), _smooth(b, eps)
    return float(0.5 * ((a - b) * (np.log(a) - np.log(b))).sum())


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def temporal_features(state: CascadeState, v: int, m: Message) -> tuple[float, float, float]:
    """``(AvgExpT, SurT, AvgFordD)`` for node ``v`` at ``state.now``."""
    ap = activated_parents(state, v)
    avg_exp = float(np.mean([state.now - t for _, t in ap])) if ap else 0.0
    times = [t for _, t in state.events]
    avg_ford = float(np.mean(np.diff(times))) if len(times) > 1 else 0.0
    return avg_exp, state.now - m.origin_time, avg_ford


def structural_features(g: SocialGraph, state: CascadeState, v: int) -> tuple[float, ...]:
    parents, _, friends = g.neighborhood(v)
    active = {p for p, _ in activated_parents(state, v)}
    social = len(active)
    act_rec = len(active.intersection(friends.tolist()))
    rec = len(friends)
    n_par = len(parents)
    return (float(social), float(_ratio(social, n_par)), float(act_rec),
            float(_ratio(act_rec, social)), float(rec), float(_ratio(rec, n_par)))


def extract(data: SocialData, state: CascadeState, v: int, m: Message) -> np.ndarray:
    """Full feature vector of one instance, recomputed from scratch."""
    g, prof = data.graph, data.profiles
    if not prof.present[v]:
        raise KeyError(f"no profile for node {v}")
    p = prof.profiles[v]
    if p.cold:
        div = sim = 0.0
    else:
        div = interest_diversity(p.interest)
        sim = interest_similarity(p.interest, m.topic)
    remsg = data.corpus.candidate_count(v, state.now, exclude=m.message_id)
    if activated_parents(state, v) and not state.activated[v]:
        remsg += 1
    n_par, n_chi = len(g.parents(v)), len(g.children(v))
    return np.array([
        float(m.has_keyword), float(m.content_length), div, sim,
        *temporal_features(state, v, m),
        *structural_features(g, state, v),
        float(p.verified), float(remsg), float(n_chi), state.now - p.account_created,
        float(_ratio(n_chi, n_par)),
    ])


class FeatureExtractor:
    """Vectorised extraction bound to one dataset.

    Per-node static columns (entropy, degrees, profile fields) are computed
    once; per-message similarity columns are cached by message id.
    """

    def __init__(self, data: SocialData):
        self.data = data
        g, prof = data.graph, data.profiles
        self.in_degree = g.in_degree.astype(float)
        self.out_degree = g.out_degree.astype(float)
        self.n_friends = g.n_friends.astype(float)
        ent = np.zeros(g.n)
        rows = prof.interest[~prof.cold]
        if len(rows):
            safe = np.where(rows > 0, rows, 1.0)
            ent[~prof.cold] = -(rows * np.log(safe)).sum(axis=1)
        self.diversity = ent
        self.smoothed = _smooth(prof.interest, SMOOTHING) if prof.n_topics else prof.interest
        self._sim_cache: dict[str, np.ndarray] = {}

    def similarity(self, m: Message) -> np.ndarray:
        sim = self._sim_cache.get(m.message_id)
        if sim is None:
            t = _smooth(np.asarray(m.topic, dtype=float), SMOOTHING)
            a = self.smoothed
            sim = 0.5 * ((a - t) * (np.log(a) - np.log(t))).sum(axis=1)
            sim[self.data.profiles.cold] = 0.0
            self._sim_cache[m.message_id] = sim
        return sim

    def __call__(self, state: CascadeState, nodes: Sequence[int], m: Message,
                 columns: Sequence[int] | None = None) -> np.ndarray:
        return self.batch(state, nodes, m, columns)

    def batch(self, state: CascadeState, nodes: Sequence[int], m: Message,
              columns: Sequence[int] | None = None) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        cols = range(N_FEATURES) if columns is None else columns
        prof = self.data.profiles
        prof.require(nodes)
        now = state.now
        out = np.empty((len(nodes), len(cols)))
        ap = state.ap_count[nodes].astype(float)
        for j, c in enumerate(cols):
            name = FEATURE_NAMES[c]
            if name == "KeyW_m":
                col = float(m.has_keyword)
            elif name == "ContLen_m":
                col = float(m.content_length)
            elif name == "IntDiv_u":
                col = self.diversity[nodes]
            elif name == "IntSim_m":
                col = self.similarity(m)[nodes]
            elif name == "AvgExpT_m":
                col = np.where(ap > 0, now - _ratio(state.ap_time_sum[nodes], ap), 0.0)
            elif name == "SurT_m":
                col = now - m.origin_time
            elif name == "AvgFordD_m":
                k = len(state.events)
                col = (state.events[-1][1] - state.events[0][1]) / (k - 1) if k > 1 else 0.0
            elif name == "SocialRe_u":
                col = ap
            elif name == "SocialReR_u":
                col = _ratio(ap, self.in_degree[nodes])
            elif name == "ActRecRel_u":
                col = state.ap_friend_count[nodes]
            elif name == "ActRecRelR_u":
                col = _ratio(state.ap_friend_count[nodes], ap)
            elif name == "RecRel_u":
                col = self.n_friends[nodes]
            elif name == "RecRelR_u":
                col = _ratio(self.n_friends[nodes], self.in_degree[nodes])
            elif name == "VerSta_u":
                col = prof.verified[nodes]
            elif name == "ReMsg_u":
                corpus = self.data.corpus
                live = (ap > 0) & ~state.activated[nodes]
                col = np.array([corpus.candidate_count(int(v), now, exclude=m.message_id)
                                for v in nodes], dtype=float) + live
            elif name == "ChlNode_u":
                col = self.out_degree[nodes]
            elif name == "AccCreT_u":
                col = now - prof.created[nodes]
            else:  # CPNodesR_u
                col = _ratio(self.out_degree[nodes], self.in_degree[nodes])
            out[:, j] = col
        return out
