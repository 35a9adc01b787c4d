"""Static wireless-network graphs and the pairwise / groupwise schedulers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist

from .actions import ActionStep

MAX_PLACEMENTS = 1000


class InfeasibleGraphError(ValueError):
    pass


def _edge(i: int, j: int) -> Tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UGraph:
    """Undirected simple graph on nodes ``1..num_nodes``."""

    num_nodes: int
    edges: FrozenSet[Tuple[int, int]]
    positions: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        edges = frozenset(_edge(int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (1 <= i <= self.num_nodes and 1 <= j <= self.num_nodes):
                raise ValueError(f"edge {(i, j)} outside 1..{self.num_nodes}")
        object.__setattr__(self, "edges", edges)

    @cached_property
    def neighbors(self) -> Dict[int, Tuple[int, ...]]:
        adj = {i: [] for i in range(1, self.num_nodes + 1)}
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return {i: tuple(sorted(v)) for i, v in adj.items()}

    @property
    def nodes(self) -> range:
        return range(1, self.num_nodes + 1)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    @property
    def max_degree(self) -> int:
        return max(self.degree(i) for i in self.nodes)

    def has_edge(self, i: int, j: int) -> bool:
        return _edge(i, j) in self.edges

    def is_connected(self) -> bool:
        return _connected(self.num_nodes, self.edges)

    def to_json(self) -> dict:
        doc = {"N": self.num_nodes, "edges": [list(e) for e in sorted(self.edges)]}
        if self.positions is not None:
            doc["positions"] = self.positions.tolist()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "UGraph":
        pos = doc.get("positions")
        return cls(int(doc["N"]), frozenset(tuple(e) for e in doc["edges"]), None if pos is None else np.asarray(pos, float))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "UGraph":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _connected(N: int, edges) -> bool:
    if N <= 1:
        return True
    if not edges:
        return False
    rows, cols = zip(*edges)
    adj = coo_matrix((np.ones(len(rows)), (np.array(rows) - 1, np.array(cols) - 1)), shape=(N, N))
    count, _ = connected_components(adj, directed=False)
    return count == 1


def complete_graph(N: int) -> UGraph:
    return UGraph(N, frozenset((i, j) for i in range(1, N + 1) for j in range(i + 1, N + 1)))


def random_geometric(N: int, L: int, rng=None) -> UGraph:
    """Connected geometric graph with exactly ``L`` links on the unit square.

    Nodes are placed uniformly; the one-hop radius is grown until ``L``
    links exist, i.e. the ``L`` closest pairs are linked. Disconnected
    placements are discarded and redrawn.
    """
    if N < 2:
        raise InfeasibleGraphError("need at least two nodes")
    if not N - 1 <= L <= N * (N - 1) // 2:
        raise InfeasibleGraphError(f"L={L} infeasible for N={N}: need {N - 1} <= L <= {N * (N - 1) // 2}")
    rng = np.random.default_rng(rng)
    iu, ju = np.triu_indices(N, k=1)
    for _ in range(MAX_PLACEMENTS):
        pos = rng.random((N, 2))
        order = np.argsort(pdist(pos), kind="stable")[:L]
        edges = frozenset(zip((iu[order] + 1).tolist(), (ju[order] + 1).tolist()))
        if _connected(N, edges):
            return UGraph(N, edges, pos)
    raise InfeasibleGraphError(f"no connected placement for N={N}, L={L} in {MAX_PLACEMENTS} attempts")


def links_for_degree(N: int, avg_degree: float) -> int:
    """Number of links ``L`` giving average degree ``2L/N``."""
    L = avg_degree * N / 2
    if L != int(L):
        raise ValueError(f"average degree {avg_degree} with N={N} gives non-integer L={L}")
    return int(L)


def pe_step(graph: UGraph, i: int, j: int) -> ActionStep:
    """Gossip between neighbors ``i`` and ``j``."""
    if not graph.has_edge(i, j):
        raise ValueError(f"{{{i}, {j}}} is not an edge")
    return ActionStep(interact={i, j})


def ge_step(graph: UGraph, i: int) -> ActionStep:
    """Node ``i`` equalizes with its whole neighborhood."""
    if i not in graph.neighbors:
        raise ValueError(f"node {i} not in graph")
    return ActionStep(interact={i, *graph.neighbors[i]})


def uniform_scheduler(graph: UGraph, mode: str, rng=None, with_initiator: bool = False) -> Iterator:
    """Endless stream of PE or GE steps with uniformly random initiators.

    PE picks the gossip partner uniformly among the initiator's neighbors.
    With ``with_initiator`` the stream yields ``(initiator, step)`` pairs.
    """
    mode = mode.upper()
    if mode not in ("PE", "GE"):
        raise ValueError(f"mode must be PE or GE, got {mode!r}")
    rng = np.random.default_rng(rng)
    N = graph.num_nodes
    nbrs = graph.neighbors
    while True:
        i = int(rng.integers(1, N + 1))
        if mode == "GE":
            step = ge_step(graph, i)
        else:
            choices = nbrs[i]
            if not choices:
                raise ValueError(f"node {i} has no neighbors")
            step = pe_step(graph, i, choices[int(rng.integers(len(choices)))])
        yield (i, step) if with_initiator else step
