"""Interaction-topology representation and Laplacian construction.

Topologies are undirected weighted graphs over agents 1..n with an optional
leader (agent 1 by convention).  Alongside the weighted Laplacian this module
builds the structural matrices used by the guaranteed-cost expressions: the
complete-graph Laplacian, the star-graph Laplacian, and the disagreement
projector I - (1/n) 1 1^T.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "TopologyError",
    "Topology",
    "canonical_edge",
    "laplacian",
    "complete_laplacian",
    "star_laplacian",
    "disagreement_projector",
    "is_connected",
    "is_leader_reachable",
    "path_topology",
    "cycle_topology",
    "complete_topology",
    "star_topology",
]


class TopologyError(Exception):
    """Invalid topology structure or edge weights."""


def canonical_edge(i: int, k: int) -> tuple[int, int]:
    """Return the undirected edge {i, k} as an ordered (min, max) pair."""
    return (i, k) if i < k else (k, i)


@dataclass(frozen=True)
class Topology:
    """Undirected weighted interaction graph.

    ``edges`` holds canonical (min, max) agent pairs; ``weights`` maps each
    canonical pair to its strictly positive initial weight.  ``leader``
    designates the leader agent for leader-follower mode (agent 1 by
    convention) and is None in leaderless mode.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: Mapping[tuple[int, int], float] = field(default=None)  # type: ignore[assignment]
    leader: Optional[int] = None

    def __post_init__(self):
        if self.n < 2:
            raise TopologyError(f"need at least 2 agents, got n={self.n}")
        canon = []
        seen = set()
        for i, k in self.edges:
            if i == k:
                raise TopologyError(f"self-loop on agent {i}")
            if not (1 <= i <= self.n and 1 <= k <= self.n):
                raise TopologyError(f"edge ({i},{k}) references an agent outside 1..{self.n}")
            pair = canonical_edge(i, k)
            if pair in seen:
                raise TopologyError(f"duplicate edge {pair}")
            seen.add(pair)
            canon.append(pair)
        canon.sort()
        object.__setattr__(self, "edges", tuple(canon))
        weights = self.weights
        if weights is None:
            weights = {pair: 1.0 for pair in canon}
        normalized = {}
        for pair in canon:
            try:
                w = float(weights[pair])
            except KeyError:
                raise TopologyError(f"missing weight for edge {pair}")
            if not w > 0.0:
                raise TopologyError(f"weight for edge {pair} must be positive, got {w}")
            normalized[pair] = w
        object.__setattr__(self, "weights", normalized)
        if self.leader is not None and not (1 <= self.leader <= self.n):
            raise TopologyError(f"leader {self.leader} outside 1..{self.n}")

    def neighbors(self, agent: int) -> list[int]:
        out = []
        for i, k in self.edges:
            if i == agent:
                out.append(k)
            elif k == agent:
                out.append(i)
        return out

    def leader_edges(self) -> tuple[tuple[int, int], ...]:
        """Canonical edges incident to the leader, in canonical order."""
        if self.leader is None:
            return ()
        return tuple(e for e in self.edges if self.leader in e)

    def follower_edges(self) -> tuple[tuple[int, int], ...]:
        """Canonical edges not incident to the leader, in canonical order."""
        if self.leader is None:
            return self.edges
        return tuple(e for e in self.edges if self.leader not in e)

    def initial_weight_vector(self, edges: Sequence[tuple[int, int]]) -> np.ndarray:
        return np.array([self.weights[e] for e in edges], dtype=float)


def laplacian(topology: Topology, weights: Mapping[tuple[int, int], float] | None = None) -> np.ndarray:
    """Weighted Laplacian D - W of the topology.

    ``weights`` overrides the topology's initial weights (used for the
    time-varying adaptive weights); it must cover every edge with a positive
    value.
    """
    w = topology.weights if weights is None else weights
    lap = np.zeros((topology.n, topology.n))
    for pair in topology.edges:
        try:
            value = float(w[pair])
        except KeyError:
            raise TopologyError(f"missing weight for edge {pair}")
        if not value > 0.0:
            raise TopologyError(f"weight for edge {pair} must be positive, got {value}")
        i, k = pair[0] - 1, pair[1] - 1
        lap[i, k] -= value
        lap[k, i] -= value
        lap[i, i] += value
        lap[k, k] += value
    return lap


def complete_laplacian(n: int, edge_weight: float) -> np.ndarray:
    """Laplacian of the complete graph on n agents with uniform edge weight.

    With edge_weight = 1/n this equals the disagreement projector
    I - (1/n) 1 1^T; all nonzero eigenvalues equal n * edge_weight.
    """
    if n < 2:
        raise TopologyError(f"need at least 2 agents, got n={n}")
    if not edge_weight > 0.0:
        raise TopologyError(f"edge weight must be positive, got {edge_weight}")
    return edge_weight * (n * np.eye(n) - np.ones((n, n)))


def star_laplacian(n: int) -> np.ndarray:
    """Laplacian of the unit-weight star graph with hub at agent 1.

    Entry (1,1) is n-1, the first row and column off-diagonals are -1, and
    the remaining diagonal block is the identity.
    """
    if n < 2:
        raise TopologyError(f"need at least 2 agents, got n={n}")
    lap = np.eye(n)
    lap[0, 0] = n - 1
    lap[0, 1:] = -1.0
    lap[1:, 0] = -1.0
    return lap


def disagreement_projector(n: int) -> np.ndarray:
    """Orthogonal projector I - (1/n) 1 1^T onto the disagreement subspace."""
    if n < 2:
        raise TopologyError(f"need at least 2 agents, got n={n}")
    return np.eye(n) - np.ones((n, n)) / n


def _reachable_from(topology: Topology, start: int) -> set[int]:
    adjacency: dict[int, list[int]] = {i: [] for i in range(1, topology.n + 1)}
    for i, k in topology.edges:
        adjacency[i].append(k)
        adjacency[k].append(i)
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for neighbor in adjacency[node]:
            if neighbor not in seen:
                seen.add(neighbor)
                queue.append(neighbor)
    return seen


def is_connected(topology: Topology) -> bool:
    """Breadth-first connectivity verdict over the undirected edges."""
    return len(_reachable_from(topology, 1)) == topology.n


def is_leader_reachable(topology: Topology) -> bool:
    """True when every follower has an undirected path to the leader."""
    if topology.leader is None:
        raise TopologyError("topology has no leader")
    return len(_reachable_from(topology, topology.leader)) == topology.n


def _uniform(edges: Sequence[tuple[int, int]], weight: float) -> dict[tuple[int, int], float]:
    return {canonical_edge(*e): weight for e in edges}


def path_topology(n: int, weight: float = 1.0, leader: Optional[int] = None) -> Topology:
    edges = [(i, i + 1) for i in range(1, n)]
    return Topology(n, tuple(edges), _uniform(edges, weight), leader)


def cycle_topology(n: int, weight: float = 1.0, leader: Optional[int] = None) -> Topology:
    edges = [(i, i % n + 1) for i in range(1, n + 1)]
    return Topology(n, tuple(canonical_edge(*e) for e in edges), _uniform(edges, weight), leader)


def complete_topology(n: int, weight: float = 1.0, leader: Optional[int] = None) -> Topology:
    edges = [(i, k) for i in range(1, n + 1) for k in range(i + 1, n + 1)]
    return Topology(n, tuple(edges), _uniform(edges, weight), leader)


def star_topology(n: int, weight: float = 1.0, leader: Optional[int] = None) -> Topology:
    edges = [(1, k) for k in range(2, n + 1)]
    return Topology(n, tuple(edges), _uniform(edges, weight), leader)
