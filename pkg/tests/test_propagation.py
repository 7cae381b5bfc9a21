from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fscalecp.cascade import CascadeState, Message, UserProfile
from fscalecp.data import SocialData
from fscalecp.graph import SocialGraph
from fscalecp.propagation import (ShellPartition, SimConfig, ThresholdRule, partition_susceptible, run,
                                  select_update_set, step)

from fixtures import ROOT, FixedPicks, SetRule, random_graph, shell_data
from oracles import brute_susceptible, threshold_closure


def shell_state(data):
    return CascadeState.from_events(data.graph, "m0", [(ROOT, 0.0)])


def test_shell_partition():
    data = shell_data()
    p = partition_susceptible(data.graph, shell_state(data).susceptible)
    assert p.independent == [0, 3]
    assert p.correlated == [[1, 2], [4, 5, 6], [7, 8]]


def test_walkthrough_two_steps():
    data = shell_data()
    state = shell_state(data)
    state.now = 0.0
    cfg = SimConfig(delta_T=72.0)
    rng = FixedPicks([1, 1, 1], [0, 1, 0])
    first = step(data, state, SetRule({0, 2, 3, 5}), cfg, rng)
    assert first.update_set == [0, 2, 3, 5, 8]
    assert first.activated == [0, 2, 3, 5]
    assert (first.n_update, first.n_susceptible) == (5, 9)
    assert Fraction(first.dt) == Fraction(5, 9) * 72

    p = partition_susceptible(data.graph, state.susceptible)
    assert p.independent == [1, 9]
    assert p.correlated == [[4, 6], [7, 8], [10, 11]]
    second = step(data, state, SetRule({9, 1, 10, 8}), cfg, rng)
    assert second.update_set == [1, 4, 8, 9, 10]
    assert sorted(second.activated) == [1, 8, 9, 10]
    assert (second.n_update, second.n_susceptible) == (5, 8)
    assert Fraction(second.dt) == Fraction(5, 8) * 72
    assert state.now == 40.0 + 45.0


def test_walkthrough_default_increment():
    data = shell_data()
    state = shell_state(data)
    state.now = 0.0
    rng = FixedPicks([1, 1, 1], [0, 1, 0])
    first = step(data, state, SetRule({0, 2, 3, 5}), SimConfig(), rng)
    second = step(data, state, SetRule(()), SimConfig(), rng)
    assert Fraction(first.dt).limit_denominator(100) == Fraction(1500, 9)
    assert Fraction(second.dt).limit_denominator(100) == Fraction(1500, 8)


def test_no_frontier_edges_all_independent():
    g = SocialGraph.from_edges(5, [(1, 0), (2, 0), (3, 0)])
    p = partition_susceptible(g, {1, 2, 3})
    assert p.independent == [1, 2, 3] and p.correlated == []
    assert select_update_set(p, np.random.default_rng(0)) == [1, 2, 3]


def union_find_components(g, nodes):
    parent = {v: v for v in nodes}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for c, p in g.child_of.tolist():
        if c in parent and p in parent:
            parent[find(c)] = find(p)
    groups = {}
    for v in nodes:
        groups.setdefault(find(v), []).append(v)
    return sorted(sorted(x) for x in groups.values())


@pytest.mark.parametrize("seed", range(10))
def test_partition_matches_union_find(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(200, 0.01, rng)
    nodes = set(rng.choice(200, size=120, replace=False).tolist())
    p = partition_susceptible(g, nodes)
    got = sorted([[v] for v in p.independent] + p.correlated)
    assert got == union_find_components(g, nodes)
    assert p.n_nodes == len(nodes)


def test_uniform_pick_frequency():
    p = ShellPartition([0], [[1, 2, 3]])
    rng = np.random.default_rng(123)
    counts = np.zeros(4)
    for _ in range(10_000):
        counts[select_update_set(p, rng)[1]] += 1
    assert np.allclose(counts[1:] / 10_000, 1 / 3, atol=0.02)


def test_zero_model_advances_clock():
    data = shell_data()
    state = shell_state(data)
    state.now = 0.0
    res = step(data, state, SetRule(()), SimConfig(delta_T=300.0), np.random.default_rng(0))
    assert res.activated == [] and res.dt > 0 and state.now == res.dt


def test_empty_frontier_signals():
    g = SocialGraph.from_edges(2, [])
    data = SocialData.build(g, [], [Message("m0", 1, False, (1.0,))],
                            [UserProfile(v, False, 0.0, (1.0,)) for v in range(2)])
    state = CascadeState.from_events(g, "m0", [(0, 0.0)])
    assert step(data, state, SetRule(()), SimConfig(), np.random.default_rng(0)).empty
    assert run(data, state, SetRule(()), SimConfig()).stop_reason == "empty"


def test_zero_horizon_returns_input():
    data = shell_data()
    state = CascadeState.from_events(data.graph, "m0", [(ROOT, 0.0), (0, 5.0), (3, 5.0), (9, 7.0)])
    res = run(data, state, SetRule(range(13)), SimConfig(horizon_T=0.0))
    assert res.cascade.events == state.cascade.events and res.trace == []


def test_same_seed_same_run():
    data = shell_data()
    rule = SetRule({0, 1, 3, 4, 5, 6, 9, 11})
    a = run(data, shell_state(data), rule, SimConfig(seed=5))
    b = run(data, shell_state(data), rule, SimConfig(seed=5))
    assert a.cascade.events == b.cascade.events


class Probe:
    """Wraps a model and records the frontier alongside the nodes it is asked to score."""

    def __init__(self, inner):
        self.inner = inner
        self.touched = []

    def activation_proba(self, data, state, nodes, m):
        self.touched.append((set(state.susceptible), [int(v) for v in nodes]))
        return self.inner.activation_proba(data, state, nodes, m)


def test_only_frontier_nodes_are_classified():
    rng = np.random.default_rng(4)
    g = random_graph(150, 0.02, rng)
    data = SocialData.build(g, [], [Message("m0", 1, False, (1.0,))],
                            [UserProfile(v, False, 0.0, (1.0,)) for v in range(150)])
    probe = Probe(ThresholdRule(1))
    run(data, CascadeState.from_events(g, "m0", [(0, 0.0)]), probe, SimConfig())
    assert probe.touched
    for frontier, nodes in probe.touched:
        assert set(nodes) <= frontier


def test_decisions_independent_of_order():
    data = shell_data()
    state = shell_state(data)
    state.now = 10.0
    rule = ThresholdRule(1)
    nodes = sorted(state.susceptible)
    p1 = rule.activation_proba(data, state, nodes, None)
    p2 = rule.activation_proba(data, state, nodes[::-1], None)[::-1]
    assert np.array_equal(p1, p2)


def engine_invariants(data, observed, model, cfg):
    res = run(data, observed, model, cfg)
    events = res.cascade.events
    assert events[:observed.size] == tuple(observed.events)
    assert len({v for v, _ in events}) == len(events)
    assert all(a[1] <= b[1] for a, b in zip(events, events[1:]))
    for row in res.trace:
        assert 0 < row.dt <= cfg.delta_T
        assert 1 <= row.n_update <= row.n_susceptible
    assert res.state.susceptible == brute_susceptible(data.graph, res.cascade.node_set())
    return res


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3), st.sampled_from(["deterministic", "bernoulli"]))
def test_engine_invariants(seed, theta, mode):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 120))
    g = random_graph(n, 4.0 / n, rng)
    data = SocialData.build(g, [], [Message("m0", 1, False, (1.0,))],
                            [UserProfile(v, False, 0.0, (1.0,)) for v in range(n)])
    seeds = rng.choice(n, size=3, replace=False).tolist()
    observed = CascadeState.from_events(g, "m0", [(int(v), 0.0) for v in seeds])
    engine_invariants(data, observed, ThresholdRule(theta), SimConfig(seed=seed, mode=mode, horizon_T=1e5))


@pytest.mark.parametrize("theta", [1, 2, 3])
def test_threshold_closure_small(theta):
    rng = np.random.default_rng(theta)
    for rep in range(10):
        g = random_graph(100, 0.05, rng)
        data = SocialData.build(g, [], [Message("m0", 1, False, (1.0,))],
                                [UserProfile(v, False, 0.0, (1.0,)) for v in range(100)])
        seeds = rng.choice(100, size=5, replace=False).tolist()
        res = run(data, CascadeState.from_events(g, "m0", [(int(v), 0.0) for v in seeds]),
                  ThresholdRule(theta), SimConfig(seed=rep, horizon_T=1e9))
        assert res.cascade.node_set() == threshold_closure(g, seeds, theta)


def test_bad_config():
    for kw in ({"delta_T": 0}, {"horizon_T": -1}, {"patience": 0}, {"mode": "coin"}):
        with pytest.raises(ValueError):
            SimConfig(**kw)


def test_converges_on_quiet_frontier():
    data = shell_data()
    res = run(data, shell_state(data), SetRule({0}), SimConfig(patience=3, horizon_T=1e9))
    assert res.stop_reason == "converged"
    assert res.cascade.node_set() == {ROOT, 0}
