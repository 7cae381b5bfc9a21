"""Two engine steps on a 13-node toy network, printed as they happen.

Node 12 is already active and its followers 0..8 form the first frontier.
Inside that frontier 1 follows 2, 5 and 6 follow 4, and 8 follows 7, so the
frontier splits into two independent nodes and three correlated sets. One
member of each correlated set is picked per step, and the clock moves by
the picked share of the frontier times the base increment.

    python demos/shell_steps.py
"""

from fractions import Fraction

import numpy as np

from fscalecp.cascade import Cascade, CascadeState, Message, UserProfile
from fscalecp.data import SocialData
from fscalecp.graph import SocialGraph
from fscalecp.propagation import SimConfig, partition_susceptible, step

ROOT = 12
EDGES = [(v, ROOT) for v in range(9)] + [(1, 2), (5, 4), (6, 4), (8, 7), (9, 0), (10, 3), (11, 5), (11, 10)]


class Fires:
    """Fires on a fixed node set, standing in for a trained classifier."""

    def __init__(self, nodes):
        self.nodes = set(nodes)

    def activation_proba(self, data, state, nodes, m):
        return np.array([float(int(v) in self.nodes) for v in nodes])


class Picks:
    """Replays chosen positions inside each correlated set instead of drawing them."""

    def __init__(self, *picks):
        self.picks = list(picks)

    def integers(self, low, high):
        return np.asarray(self.picks.pop(0))

    def random(self, n):
        return np.zeros(n)


def main():
    g = SocialGraph.from_edges(13, EDGES)
    msg = Message("m0", 10, False, (0.5, 0.5))
    data = SocialData.build(g, [Cascade("m0", ((ROOT, 0.0),))], [msg],
                            [UserProfile(v, False, -1000.0, (0.5, 0.5)) for v in range(13)])
    state = CascadeState.from_events(g, "m0", [(ROOT, 0.0)])
    state.now = 0.0
    cfg = SimConfig(delta_T=Fraction(300))
    rng = Picks([1, 1, 1], [0, 1, 0])
    for fire in ({0, 2, 3, 5}, {1, 8, 9, 10}):
        p = partition_susceptible(g, state.susceptible)
        print(f"frontier {sorted(state.susceptible)}")
        print(f"  independent {p.independent}  correlated {p.correlated}")
        res = step(data, state, Fires(fire), cfg, rng)
        print(f"  updated {res.update_set}  activated {res.activated}")
        print(f"  dt = {res.n_update}/{res.n_susceptible} * 300 = {res.dt} s, clock now {float(state.now):.2f} s")
    print(f"final cascade: {[v for v, _ in state.cascade.events]}")


if __name__ == "__main__":
    main()
