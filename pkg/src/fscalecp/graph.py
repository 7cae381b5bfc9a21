"""Directed follower graph with dense node ids.

An edge ``child -> parent`` means *child follows parent*: the child is exposed
to whatever the parent publishes, so information flows from parents to
children. Adjacency is stored in CSR form in both directions.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable

import numpy as np

logger = logging.getLogger(__name__)


class GraphParseError(ValueError):
    """Malformed edge-list line."""

    def __init__(self, lineno: int, line: str):
        super().__init__(f"line {lineno}: expected 'child<TAB>parent', got {line!r}")
        self.lineno = lineno


@dataclass(frozen=True)
class LoadReport:
    lines: int
    edges: int
    duplicates: int
    self_loops: int


def _contains(sorted_keys: np.ndarray, query: np.ndarray) -> np.ndarray:
    if len(sorted_keys) == 0:
        return np.zeros(len(query), dtype=bool)
    pos = np.minimum(np.searchsorted(sorted_keys, query), len(sorted_keys) - 1)
    return sorted_keys[pos] == query


def _csr(n: int, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, cols.astype(np.int64)


@dataclass(eq=False)
class SocialGraph:
    """Immutable directed social graph over nodes ``0..n-1``.

    Built from a ``(child, parent)`` edge array; duplicates and self loops
    must already be removed (use :meth:`from_edges` which does that).
    """

    n: int
    child_of: np.ndarray  # edge array, column 0 = child, column 1 = parent
    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        edges = np.asarray(self.child_of, dtype=np.int64).reshape(-1, 2)
        self.child_of = edges
        if not self.ids:
            self.ids = [str(i) for i in range(self.n)]
        self.index = {ext: i for i, ext in enumerate(self.ids)}
        self.par_ptr, self.par_idx = _csr(self.n, edges[:, 0], edges[:, 1])
        self.chi_ptr, self.chi_idx = _csr(self.n, edges[:, 1], edges[:, 0])
        self.in_degree = np.diff(self.par_ptr)
        self.out_degree = np.diff(self.chi_ptr)
        # par_reciprocal[k]: the k-th parent entry also follows its child back
        width = max(self.n, 1)
        keys = np.sort(edges[:, 0] * width + edges[:, 1])
        par_child = np.repeat(np.arange(self.n), self.in_degree)
        self.par_reciprocal = _contains(keys, self.par_idx * width + par_child)
        chi_parent = np.repeat(np.arange(self.n), self.out_degree)
        self.chi_reciprocal = _contains(keys, chi_parent * width + self.chi_idx)
        self.n_friends = np.bincount(
            par_child, weights=self.par_reciprocal, minlength=self.n
        ).astype(np.int64)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], ids: list[str] | None = None) -> "SocialGraph":
        arr = np.array(list(edges), dtype=np.int64).reshape(-1, 2)
        arr = arr[arr[:, 0] != arr[:, 1]]
        if len(arr):
            arr = np.unique(arr, axis=0)
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("edge endpoint out of range")
        return cls(n, arr, list(ids) if ids else [])

    @property
    def n_edges(self) -> int:
        return len(self.child_of)

    def _check(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} out of range for graph with {self.n} nodes")

    def parents(self, v: int) -> np.ndarray:
        self._check(v)
        return self.par_idx[self.par_ptr[v]:self.par_ptr[v + 1]]

    def children(self, v: int) -> np.ndarray:
        self._check(v)
        return self.chi_idx[self.chi_ptr[v]:self.chi_ptr[v + 1]]

    def friends(self, v: int) -> np.ndarray:
        self._check(v)
        lo, hi = self.par_ptr[v], self.par_ptr[v + 1]
        return self.par_idx[lo:hi][self.par_reciprocal[lo:hi]]

    def neighborhood(self, v: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(parents, children, friends)`` of ``v``, each sorted."""
        return self.parents(v), self.children(v), self.friends(v)

    def undirected_neighbors(self, v: int) -> np.ndarray:
        return np.union1d(self.parents(v), self.children(v))

    def edge_lines(self) -> list[str]:
        return [f"{self.ids[c]}\t{self.ids[p]}" for c, p in self.child_of]


def neighborhood(g: SocialGraph, v: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return g.neighborhood(v)


def load_graph(stream: BinaryIO | bytes | str) -> tuple[SocialGraph, LoadReport]:
    """Parse a ``child<TAB>parent`` edge list.

    Node ids are assigned densely in order of first appearance, so identical
    input produces an identical graph. Comment lines start with ``#``.
    Self loops are dropped and counted; duplicate lines are deduplicated.
    """
    if isinstance(stream, str):
        stream = stream.encode("utf-8")
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    ids: list[str] = []
    index: dict[str, int] = {}
    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    lines = dups = loops = 0

    def intern(ext: str) -> int:
        i = index.get(ext)
        if i is None:
            i = index[ext] = len(ids)
            ids.append(ext)
        return i

    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8").rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        lines += 1
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise GraphParseError(lineno, line)
        child, parent = intern(parts[0]), intern(parts[1])
        if child == parent:
            loops += 1
            continue
        if (child, parent) in seen:
            dups += 1
            continue
        seen.add((child, parent))
        edges.append((child, parent))
    if loops:
        logger.warning("dropped %d self-loop edge(s)", loops)
    g = SocialGraph(len(ids), np.array(edges, dtype=np.int64).reshape(-1, 2), ids)
    return g, LoadReport(lines=lines, edges=len(edges), duplicates=dups, self_loops=loops)
