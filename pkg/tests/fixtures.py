"""Hand-built graphs and datasets shared by several test modules."""

from __future__ import annotations

import numpy as np

from fscalecp.cascade import Cascade, Message, UserProfile
from fscalecp.data import SocialData
from fscalecp.graph import SocialGraph

ROOT = 12

# (child, parent) pairs. Node 12 is the already-active root whose followers
# 0..8 form the first frontier. Inside that frontier 1 follows 2, 5 and 6
# follow 4, 8 follows 7. The next shell hangs off 0, 3 and 5, and 11 also
# follows 10.
SHELL_EDGES = [(v, ROOT) for v in range(9)] + [
    (1, 2), (5, 4), (6, 4), (8, 7),
    (9, 0), (10, 3), (11, 5), (11, 10),
]


def shell_graph() -> SocialGraph:
    return SocialGraph.from_edges(13, SHELL_EDGES)


def shell_data(n_topics: int = 2) -> SocialData:
    g = shell_graph()
    topic = tuple([1.0 / n_topics] * n_topics)
    msg = Message("m0", 10, False, topic, 0.0)
    profiles = [UserProfile(v, False, -1000.0, topic) for v in range(g.n)]
    cascade = Cascade("m0", ((ROOT, 0.0),))
    return SocialData.build(g, [cascade], [msg], profiles)


class FixedPicks:
    """Stand-in generator whose ``integers`` returns a scripted sequence of picks."""

    def __init__(self, *picks):
        self.picks = [np.asarray(p) for p in picks]

    def integers(self, low, high):
        return self.picks.pop(0)

    def random(self, n):
        return np.zeros(n)


class SetRule:
    """Activation model that fires exactly on a fixed node set."""

    def __init__(self, nodes):
        self.nodes = set(nodes)

    def activation_proba(self, data, state, nodes, m):
        return np.array([1.0 if int(v) in self.nodes else 0.0 for v in nodes])


def random_graph(n: int, p: float, rng: np.random.Generator) -> SocialGraph:
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    return SocialGraph.from_edges(n, np.argwhere(mask).tolist())
