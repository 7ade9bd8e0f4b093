"""Undirected graphs with a canonical orientation and their incidence matrices.

Vertices are labelled 1..n at the public boundary.  Every undirected edge
{i, j} is stored once as (min, max) and oriented tail=min -> head=max; edges
are sorted lexicographically so matrix layouts are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    _neighbors: tuple[frozenset[int], ...] = field(repr=False, compare=False, default=())

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> frozenset[int]:
        """Neighbor set N_i of vertex ``i`` (1-based)."""
        if not 1 <= i <= self.n:
            raise ValidationError(f"vertex {i} out of range 1..{self.n}")
        return self._neighbors[i - 1]

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def edge_index(self, i: int, j: int) -> tuple[int, int]:
        """Return ``(k, sign)``: 0-based edge index of {i, j} and +1 if i->j is the stored orientation."""
        key = (min(i, j), max(i, j))
        try:
            k = self._edge_lookup[key]
        except KeyError:
            raise ValidationError(f"edge ({i}, {j}) is not in the graph") from None
        return k, (1 if i < j else -1)

    @cached_property
    def _edge_lookup(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    # 0-based index arrays used by the vectorised numerics
    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([i - 1 for i, _ in self.edges], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([j - 1 for _, j in self.edges], dtype=int)

    @cached_property
    def incidence(self) -> np.ndarray:
        return incidence_matrix(self, 1)

    def is_connected(self) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            v = stack.pop()
            for w in self.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n


def build_graph(n: int, edges: Iterable[Sequence[int]]) -> Graph:
    """Validate an edge list and return a graph with canonical edge ordering."""
    if int(n) != n or n < 2:
        raise ValidationError(f"graph needs n >= 2 vertices, got {n}")
    n = int(n)
    canon: set[tuple[int, int]] = set()
    for raw in edges:
        if len(raw) != 2:
            raise ValidationError(f"edge {tuple(raw)} must have exactly two endpoints")
        i, j = (int(raw[0]), int(raw[1]))
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValidationError(f"edge ({i}, {j}) has an endpoint outside 1..{n}")
        if i == j:
            raise ValidationError(f"edge ({i}, {j}) is a self-loop")
        key = (min(i, j), max(i, j))
        if key in canon:
            raise ValidationError(f"duplicate edge ({i}, {j})")
        canon.add(key)
    ordered = tuple(sorted(canon))
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for i, j in ordered:
        nbrs[i - 1].add(j)
        nbrs[j - 1].add(i)
    return Graph(n, ordered, tuple(frozenset(s) for s in nbrs))


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise ValidationError(f"complete graph needs n >= 2, got {n}")
    return build_graph(n, combinations(range(1, n + 1), 2))


def incidence_matrix(g: Graph, d: int = 1) -> np.ndarray:
    """Incidence matrix H (m x n), or its lift H (x) I_d (dm x dn) when d > 1.

    Row k carries -1 at the tail and +1 at the head of edge k.
    """
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    H = np.zeros((g.m, g.n))
    rows = np.arange(g.m)
    H[rows, [i - 1 for i, _ in g.edges]] = -1.0
    H[rows, [j - 1 for _, j in g.edges]] = 1.0
    if d == 1:
        return H
    return np.kron(H, np.eye(d))
