"""Cascades, messages, user profiles and the live simulation state."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph import SocialGraph


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


@dataclass(frozen=True)
class Cascade:
    """Activation sequence of one message: ``(node, t)`` pairs sorted by time."""

    message_id: str
    events: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        events = tuple((int(v), float(t)) for v, t in self.events)
        object.__setattr__(self, "events", events)
        seen = set()
        last = -math.inf
        for v, t in events:
            if t < last:
                raise ValidationError(f"cascade {self.message_id}: events not sorted by time")
            if v in seen:
                raise ValidationError(f"cascade {self.message_id}: node {v} activated twice")
            seen.add(v)
            last = t

    @classmethod
    def from_unsorted(cls, message_id: str, events: Iterable[tuple[int, float]]) -> "Cascade":
        return cls(message_id, tuple(sorted(events, key=lambda e: (e[1],))))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def nodes(self) -> list[int]:
        return [v for v, _ in self.events]

    @property
    def times(self) -> np.ndarray:
        return np.array([t for _, t in self.events], dtype=float)

    def node_set(self) -> set[int]:
        return {v for v, _ in self.events}

    def prefix(self, k: int) -> "Cascade":
        return Cascade(self.message_id, self.events[:k])


@dataclass(frozen=True)
class Message:
    message_id: str
    content_length: int
    has_keyword: bool
    topic: tuple[float, ...]
    origin_time: float = 0.0

    def __post_init__(self) -> None:
        topic = np.asarray(self.topic, dtype=float)
        if self.content_length < 0:
            raise ValidationError(f"message {self.message_id}: negative content_length")
        if (topic < 0).any() or abs(topic.sum() - 1.0) > 1e-9:
            raise ValidationError(f"message {self.message_id}: topic is not a probability vector")
        object.__setattr__(self, "topic", tuple(float(x) for x in topic))


@dataclass(frozen=True)
class UserProfile:
    node: int
    verified: bool
    account_created: float
    interest: tuple[float, ...] | None = None  # None marks a cold user

    @property
    def cold(self) -> bool:
        return self.interest is None


class CascadeState:
    """Mutable activation state of one message on a graph.

    Besides the activated set, per-node exposure counters are maintained
    incrementally on every activation: number of activated parents, the sum of
    their activation times and how many of them are friends. Feature
    extraction reads these instead of rescanning neighbourhoods.
    """

    def __init__(self, graph: SocialGraph, message_id: str = "", now: float = -math.inf):
        n = graph.n
        self.graph = graph
        self.message_id = message_id
        self.now = now
        self.activated = np.zeros(n, dtype=bool)
        self.act_time = np.full(n, np.inf)
        self.ap_count = np.zeros(n, dtype=np.int64)
        self.ap_time_sum = np.zeros(n)
        self.ap_friend_count = np.zeros(n, dtype=np.int64)
        self.susceptible: set[int] = set()
        self.events: list[tuple[int, float]] = []

    def activate(self, nodes: Iterable[int], t: float) -> None:
        g = self.graph
        if self.events and t < self.events[-1][1]:
            raise ValidationError("activation time goes backwards")
        for v in nodes:
            v = int(v)
            if self.activated[v]:
                raise ValidationError(f"node {v} is already activated")
            self.activated[v] = True
            self.act_time[v] = t
            self.events.append((v, t))
            self.susceptible.discard(v)
            lo, hi = g.chi_ptr[v], g.chi_ptr[v + 1]
            if lo == hi:
                continue
            kids = g.chi_idx[lo:hi]
            self.ap_count[kids] += 1
            self.ap_time_sum[kids] += t
            self.ap_friend_count[kids[g.chi_reciprocal[lo:hi]]] += 1
            self.susceptible.update(kids[~self.activated[kids]].tolist())

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def cascade(self) -> Cascade:
        return Cascade(self.message_id, tuple(self.events))

    def first_time(self) -> float:
        return self.events[0][1] if self.events else math.nan

    def last_time(self) -> float:
        return self.events[-1][1] if self.events else math.nan

    def copy(self) -> "CascadeState":
        other = CascadeState.__new__(CascadeState)
        other.graph = self.graph
        other.message_id = self.message_id
        other.now = self.now
        for name in ("activated", "act_time", "ap_count", "ap_time_sum", "ap_friend_count"):
            setattr(other, name, getattr(self, name).copy())
        other.susceptible = set(self.susceptible)
        other.events = list(self.events)
        return other

    @classmethod
    def from_events(cls, graph: SocialGraph, message_id: str, events: Sequence[tuple[int, float]],
                    now: float | None = None) -> "CascadeState":
        state = cls(graph, message_id)
        i = 0
        while i < len(events):
            j = i
            t = events[i][1]
            while j < len(events) and events[j][1] == t:
                j += 1
            state.activate([v for v, _ in events[i:j]], t)
            i = j
        state.now = now if now is not None else state.last_time() if events else -math.inf
        return state


def observe_before(graph: SocialGraph, cascade: Cascade, t: float) -> CascadeState:
    """Partial observation ``{v : t(v) < t}`` with the clock set to ``t``."""
    events = [e for e in cascade.events if e[1] < t]
    state = CascadeState.from_events(graph, cascade.message_id, events)
    state.now = t
    return state


def activated_parents(state: CascadeState, v: int) -> list[tuple[int, float]]:
    """Activated parents of ``v`` with their activation times, oldest first."""
    out = [(int(p), float(state.act_time[p])) for p in state.graph.parents(v) if state.activated[p]]
    out.sort(key=lambda pt: (pt[1], pt[0]))
    return out


@dataclass
class _Exposure:
    first: float   # earliest activation time of any parent
    own: float     # own activation time, inf if never


class Corpus:
    """Immutable collection of cascades and their messages, indexed by node."""

    def __init__(self, graph: SocialGraph, cascades: Sequence[Cascade], messages: dict[str, Message]):
        self.graph = graph
        self.cascades: dict[str, Cascade] = {}
        for c in cascades:
            if c.message_id in self.cascades:
                raise ValidationError(f"duplicate cascade for message {c.message_id}")
            if c.message_id not in messages:
                raise ValidationError(f"cascade {c.message_id} has no message record")
            for v, _ in c.events:
                if not 0 <= v < graph.n:
                    raise ValidationError(f"cascade {c.message_id}: unknown node {v}")
            self.cascades[c.message_id] = c
        self.messages = dict(messages)
        self._exposure: dict[str, dict[int, _Exposure]] = {}
        own_lists: list[list[tuple[float, str]]] = [[] for _ in range(graph.n)]
        exp_lists: list[list[float]] = [[] for _ in range(graph.n)]
        both_lists: list[list[float]] = [[] for _ in range(graph.n)]
        for mid, c in self.cascades.items():
            table: dict[int, _Exposure] = {}
            for v, t in c.events:
                for kid in graph.children(v).tolist():
                    if kid not in table:
                        table[kid] = _Exposure(t, math.inf)
            for v, t in c.events:
                table.setdefault(v, _Exposure(math.inf, math.inf)).own = t
                own_lists[v].append((t, mid))
            self._exposure[mid] = table
            for v, ex in table.items():
                if math.isfinite(ex.first):
                    exp_lists[v].append(ex.first)
                    if math.isfinite(ex.own):
                        both_lists[v].append(max(ex.first, ex.own))
        self._own = [sorted(x) for x in own_lists]
        self._exp = [sorted(x) for x in exp_lists]
        self._both = [sorted(x) for x in both_lists]

    def __len__(self) -> int:
        return len(self.cascades)

    def exposure(self, message_id: str, v: int) -> tuple[float, float]:
        ex = self._exposure.get(message_id, {}).get(v)
        return (ex.first, ex.own) if ex else (math.inf, math.inf)

    def history(self, v: int, t: float) -> list[str]:
        """Messages ``v`` activated to strictly before ``t``."""
        own = self._own[v]
        k = bisect.bisect_left(own, (t, ""))
        return [mid for _, mid in own[:k]]

    def candidate_count(self, v: int, t: float, exclude: str | None = None) -> int:
        """Size of the candidate message set of ``v`` at ``t``.

        A message counts when some parent activated to it before ``t`` and
        ``v`` itself did not. ``exclude`` drops one message's contribution.
        """
        n = bisect.bisect_left(self._exp[v], t) - bisect.bisect_left(self._both[v], t)
        if exclude is not None:
            first, own = self.exposure(exclude, v)
            if first < t and not own < t:
                n -= 1
        return n

    def message_sets(self, v: int, t: float) -> tuple[set[str], set[str]]:
        hm = set(self.history(v, t))
        cm = {mid for mid, table in self._exposure.items()
              if (ex := table.get(v)) is not None and ex.first < t and not ex.own < t}
        return hm, cm

    def mean_interest(self, v: int) -> tuple[float, ...] | None:
        """Average topic vector over every message ``v`` ever activated to."""
        own = self._own[v]
        if not own:
            return None
        topics = np.array([self.messages[mid].topic for _, mid in own])
        return tuple(float(x) for x in topics.mean(axis=0))


def message_sets(corpus: Corpus, v: int, t: float) -> tuple[set[str], set[str]]:
    return corpus.message_sets(v, t)


@dataclass
class ProfileTable:
    """Column view of user profiles for vectorised feature extraction."""

    n: int
    n_topics: int
    present: np.ndarray
    verified: np.ndarray
    created: np.ndarray
    interest: np.ndarray     # n x K, rows of cold users are zero
    cold: np.ndarray
    profiles: dict[int, UserProfile] = field(default_factory=dict)

    @classmethod
    def build(cls, n: int, profiles: Iterable[UserProfile], n_topics: int,
              corpus: Corpus | None = None) -> "ProfileTable":
        """Tabulate profiles; missing interests are derived from ``corpus`` history."""
        table = cls(n, n_topics, np.zeros(n, bool), np.zeros(n), np.zeros(n),
                    np.zeros((n, n_topics)), np.ones(n, bool))
        for p in profiles:
            if not 0 <= p.node < n:
                raise ValidationError(f"profile for unknown node {p.node}")
            interest = p.interest
            if interest is None and corpus is not None:
                interest = corpus.mean_interest(p.node)
                p = UserProfile(p.node, p.verified, p.account_created, interest)
            table.profiles[p.node] = p
            table.present[p.node] = True
            table.verified[p.node] = float(p.verified)
            table.created[p.node] = p.account_created
            if interest is not None:
                vec = np.asarray(interest, dtype=float)
                if vec.shape != (n_topics,):
                    raise ValidationError(f"profile {p.node}: interest has {vec.size} topics, expected {n_topics}")
                if (vec < 0).any() or abs(vec.sum() - 1.0) > 1e-9:
                    raise ValidationError(f"profile {p.node}: interest is not a probability vector")
                table.interest[p.node] = vec
                table.cold[p.node] = False
        return table

    def require(self, nodes: np.ndarray) -> None:
        missing = nodes[~self.present[nodes]]
        if len(missing):
            raise KeyError(f"no profile for node {int(missing[0])}")
