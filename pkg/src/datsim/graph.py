"""Undirected interaction topology: adjacency, Laplacian, incidence, spectrum.

Node labels are 1-based throughout the public API, matching the scenario
file format. Edge weights are fixed at 1; directed or weighted graphs are
out of scope.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Immutable undirected interaction graph over ``n`` nodes.

    Attributes:
        n: node count.
        edges: canonical edge list, each as ``(lo, hi)`` with ``lo < hi``,
            sorted lexicographically. This order fixes the incidence
            columns.
        adjacency: (n, n) symmetric 0/1 matrix with zero diagonal.
        laplacian: (n, n) matrix with ``l_ii = degree(i)`` and
            ``l_ij = -a_ij`` off-diagonal; rows sum to zero.
        incidence: (n, |E|) matrix; each edge leaves its smaller endpoint
            (entry -1) and enters the larger (entry +1), so that
            ``laplacian == incidence @ incidence.T`` exactly.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: np.ndarray
    laplacian: np.ndarray
    incidence: np.ndarray

    def neighbors(self, i: int) -> tuple[int, ...]:
        """1-based labels of the neighbors of node ``i`` (1-based)."""
        row = self.adjacency[i - 1]
        return tuple(int(j) + 1 for j in np.nonzero(row)[0])


def build_topology(edges, n: int) -> Topology:
    """Build a :class:`Topology` from an unordered edge list.

    Args:
        edges: iterable of node pairs with labels in ``1..n``.
        n: node count.

    Raises:
        ValueError: on self edges, duplicate edges, or labels out of range.
    """
    if n < 1:
        raise ValueError(f"node count must be positive, got {n}")
    canon: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for edge in edges:
        a, b = (int(v) for v in edge)
        if a == b:
            raise ValueError(f"self edge ({a},{b}) is not allowed")
        if not (1 <= a <= n and 1 <= b <= n):
            raise ValueError(f"edge ({a},{b}) has a node label outside 1..{n}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ValueError(f"duplicate edge ({key[0]},{key[1]})")
        seen.add(key)
        canon.append(key)
    canon.sort()

    adjacency = np.zeros((n, n))
    for lo, hi in canon:
        adjacency[lo - 1, hi - 1] = 1.0
        adjacency[hi - 1, lo - 1] = 1.0
    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
    incidence = np.zeros((n, len(canon)))
    for j, (lo, hi) in enumerate(canon):
        incidence[lo - 1, j] = -1.0
        incidence[hi - 1, j] = 1.0

    for arr in (adjacency, laplacian, incidence):
        arr.flags.writeable = False
    return Topology(n, tuple(canon), adjacency, laplacian, incidence)


def is_connected(topology: Topology) -> bool:
    """Breadth-first connectivity check, independent of any eigensolver."""
    n = topology.n
    if n == 1:
        return True
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.nonzero(topology.adjacency[i])[0]:
            if not visited[j]:
                visited[j] = True
                queue.append(int(j))
    return bool(visited.all())


def fiedler_value(topology: Topology) -> float:
    """Second-smallest Laplacian eigenvalue (algebraic connectivity).

    Nonnegative, and positive exactly when the graph is connected.

    Raises:
        ValueError: for graphs with fewer than two nodes.
        np.linalg.LinAlgError: if the symmetric eigensolver fails.
    """
    if topology.n < 2:
        raise ValueError("algebraic connectivity needs at least two nodes")
    eigenvalues = np.linalg.eigvalsh(topology.laplacian)
    return float(eigenvalues[1])
