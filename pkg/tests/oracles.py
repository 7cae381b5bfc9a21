"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import numpy as np


def threshold_closure(g, seeds, theta):
    """Final active set of the monotone rule ``|active parents| >= theta`` by BFS."""
    active = set(int(s) for s in seeds)
    count = np.zeros(g.n, dtype=np.int64)
    queue = list(active)
    while queue:
        v = queue.pop()
        for c in g.children(v).tolist():
            count[c] += 1
            if c not in active and count[c] >= theta:
                active.add(c)
                queue.append(c)
    return active


def brute_susceptible(g, active):
    """Inactive children of active nodes, by scanning every edge."""
    active = set(active)
    return {int(c) for c, p in g.child_of.tolist() if p in active and c not in active}


def brute_message_sets(cascades, parents_of, v, t):
    """(history, candidates) of ``v`` at ``t`` straight from the definitions."""
    hm, cm = set(), set()
    for c in cascades:
        times = dict(c.events)
        own = times.get(v)
        if own is not None and own < t:
            hm.add(c.message_id)
        elif any(times.get(p, float("inf")) < t for p in parents_of):
            cm.add(c.message_id)
    return hm, cm


def rwr_solve(n, edges, restart, start=0):
    """Restart-walk stationary vector by a dense linear solve.

    Edges are undirected; each node moves to a uniformly chosen neighbour.
    """
    W = np.zeros((n, n))
    for a, b in edges:
        W[a, b] = W[b, a] = 1.0
    deg = W.sum(axis=1, keepdims=True)
    W = np.divide(W, deg, out=np.zeros_like(W), where=deg > 0)
    e = np.zeros(n)
    e[start] = 1.0
    return np.linalg.solve(np.eye(n) - (1 - restart) * W.T, restart * e)


def best_subset(score, d, k):
    """Exhaustive search over all size-``k`` subsets of ``range(d)``."""
    from itertools import combinations
    return max(combinations(range(d), k), key=lambda s: (score(s), [-i for i in s]))


def sbs(score, d, k):
    """Plain sequential backward selection: drop the least useful feature until ``k`` remain."""
    X = set(range(d))
    while len(X) > k:
        best, best_j = None, -np.inf
        for x in sorted(X):
            j = score(X - {x})
            if j > best_j:
                best, best_j = x, j
        X.discard(best)
    return tuple(sorted(X))


def planted_selection_data(seed, n=500, d=8, noise=0.3):
    """Labels from two informative columns at random positions; the rest is noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    pair = tuple(sorted(rng.choice(d, size=2, replace=False).tolist()))
    z = X[:, pair[0]] - X[:, pair[1]] + noise * rng.normal(size=n)
    return X, np.where(z > 0, 1, -1), pair
