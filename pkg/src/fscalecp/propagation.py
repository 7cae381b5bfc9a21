"""Asynchronous shell-by-shell propagation of activation labels.

Each step takes the current susceptible frontier, splits it into connected
components of the frontier-induced subgraph, and updates every singleton
plus one uniformly drawn member of each larger component. All decisions in
a step read the pre-step state; activations are then applied at once and
the clock advances by ``delta_T * |update set| / |frontier|``.

Any object with ``activation_proba(data, state, nodes, message)`` returning
probabilities in [0, 1] can drive the engine.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .cascade import Cascade, CascadeState, Message
from .data import SocialData
from .graph import SocialGraph

MODES = ("deterministic", "bernoulli")


class ActivationModel(Protocol):
    def activation_proba(self, data: SocialData, state: CascadeState, nodes: Sequence[int],
                         m: Message) -> np.ndarray: ...


@dataclass
class SimConfig:
    delta_T: float = 300.0          # a Fraction here keeps every step increment exact
    horizon_T: float = 432000.0
    seed: int = 0
    mode: str = "deterministic"
    patience: int = 3

    def __post_init__(self) -> None:
        if not self.delta_T > 0:
            raise ValueError("delta_T must be positive")
        if not self.horizon_T >= 0:
            raise ValueError("horizon_T must be non-negative")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class ShellPartition:
    independent: list[int]
    correlated: list[list[int]]

    @property
    def n_nodes(self) -> int:
        return len(self.independent) + sum(len(c) for c in self.correlated)


def _gather(ptr: np.ndarray, idx: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All CSR entries of ``nodes`` as parallel (row, column) arrays."""
    counts = ptr[nodes + 1] - ptr[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    starts = np.repeat(ptr[nodes] - np.cumsum(counts) + counts, counts)
    pos = starts + np.arange(total)
    return np.repeat(nodes, counts), idx[pos]


def partition_susceptible(g: SocialGraph, susceptible) -> ShellPartition:
    """Connected components of the frontier, ignoring edge direction."""
    nodes = np.array(sorted(susceptible), dtype=np.int64)
    if len(nodes) == 0:
        return ShellPartition([], [])
    src, dst = _gather(g.par_ptr, g.par_idx, nodes)
    inside = np.zeros(g.n, dtype=bool)
    inside[nodes] = True
    keep = inside[dst]
    a = np.searchsorted(nodes, src[keep])   # non-decreasing, so rows come out in CSR order
    b = np.searchsorted(nodes, dst[keep])
    if len(a) == 0:
        return ShellPartition(nodes.tolist(), [])
    m = len(nodes)
    indptr = np.zeros(m + 1, dtype=np.int32)
    np.cumsum(np.bincount(a, minlength=m), out=indptr[1:])
    adj = csr_matrix((np.ones(len(a)), b.astype(np.int32), indptr), shape=(m, m))
    _, labels = connected_components(adj, directed=True, connection="weak")
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels)
    groups = np.split(nodes[order], np.cumsum(sizes)[:-1])
    independent = sorted(int(grp[0]) for grp in groups if len(grp) == 1)
    correlated = sorted((grp.tolist() for grp in groups if len(grp) > 1), key=lambda c: c[0])
    return ShellPartition(independent, correlated)


def select_update_set(p: ShellPartition, rng: np.random.Generator) -> list[int]:
    """Every independent node plus one uniform pick from each correlated set."""
    picks = []
    if p.correlated:
        sizes = np.array([len(c) for c in p.correlated])
        draws = rng.integers(0, sizes)
        picks = [c[int(k)] for c, k in zip(p.correlated, draws)]
    return sorted(p.independent + picks)


@dataclass
class StepResult:
    activated: list[int]
    dt: float
    n_susceptible: int
    n_update: int
    update_set: list[int] = field(default_factory=list, repr=False)

    @property
    def empty(self) -> bool:
        return self.n_susceptible == 0


def step(data: SocialData, state: CascadeState, model: ActivationModel, cfg: SimConfig,
         rng: np.random.Generator, message: Message | None = None,
         partition: ShellPartition | None = None) -> StepResult:
    """One asynchronous update; mutates ``state``.

    Returns an empty result (``n_susceptible == 0``) when there is nothing
    left to update.
    """
    n_sus = len(state.susceptible)
    if n_sus == 0:
        return StepResult([], 0.0, 0, 0)
    m = message or data.corpus.messages[state.message_id]
    part = partition if partition is not None else partition_susceptible(state.graph, state.susceptible)
    update = select_update_set(part, rng)
    proba = np.asarray(model.activation_proba(data, state, update, m), dtype=float)
    if cfg.mode == "deterministic":
        fire = proba > 0.5
    else:
        fire = rng.random(len(update)) < proba
    dt = cfg.delta_T * len(update) / n_sus
    state.now = state.now + dt
    new = [v for v, f in zip(update, fire) if f]
    if new:
        state.activate(new, state.now)
    return StepResult(new, dt, n_sus, len(update), update)


@dataclass
class TraceRow:
    step: int
    n_susceptible: int
    n_update: int
    dt: float
    n_activated: int
    now: float


@dataclass
class RunResult:
    cascade: Cascade
    state: CascadeState
    trace: list[TraceRow]
    stop_reason: str


def run(data: SocialData, observed: CascadeState, model: ActivationModel, cfg: SimConfig,
        message: Message | None = None) -> RunResult:
    """Grow an observed cascade until the horizon, an empty frontier, or quiescence.

    The clock starts at the newest observed timestamp. Quiescence means
    ``patience`` consecutive steps without activations *and* every frontier
    node evaluated at least once since the last activation.
    """
    state = observed.copy()
    trace: list[TraceRow] = []
    if state.size == 0:
        return RunResult(state.cascade, state, trace, "empty")
    m = message or data.corpus.messages[state.message_id]
    rng = np.random.default_rng(cfg.seed)
    t_new = state.last_time()
    state.now = t_new
    end = t_new + cfg.horizon_T
    partition = None
    quiet = 0
    pending = set(state.susceptible)
    reason = "horizon"
    while state.now < end:
        if not state.susceptible:
            reason = "empty"
            break
        if partition is None:
            partition = partition_susceptible(state.graph, state.susceptible)
        res = step(data, state, model, cfg, rng, m, partition)
        trace.append(TraceRow(len(trace), res.n_susceptible, res.n_update, res.dt,
                              len(res.activated), state.now))
        if res.activated:
            partition = None
            quiet = 0
            pending = set(state.susceptible)
        else:
            quiet += 1
            pending.difference_update(res.update_set)
            if quiet >= cfg.patience and not pending:
                reason = "converged"
                break
    return RunResult(state.cascade, state, trace, reason)


def write_trace(path, trace: Sequence[TraceRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in trace:
            fh.write(json.dumps(asdict(row), separators=(",", ":")) + "\n")


class ThresholdRule:
    """Activate exactly when at least ``theta`` parents are active."""

    variant = "threshold"

    def __init__(self, theta: int):
        self.theta = theta

    def activation_proba(self, data, state, nodes, m):
        return (state.ap_count[np.asarray(nodes, dtype=np.int64)] >= self.theta).astype(float)

    def to_dict(self) -> dict[str, Any]:
        return {"format": "fscalecp-model/1", "variant": self.variant, "theta": self.theta}
