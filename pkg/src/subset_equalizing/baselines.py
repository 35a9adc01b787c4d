"""Synchronous consensus baselines and the transmission cost model.

The maximum-degree (MDW) and Metropolis (MW) baselines average the ``P_i``
and ``q_i`` element-wise with a doubly stochastic weight matrix; each node
then solves its local averaged system.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .spd import solve_spd_many
from .topology import UGraph


def mdw_weights(graph: UGraph) -> np.ndarray:
    """Maximum-degree weights: ``1 / (1 + d_max)`` on every link.

    Node ``i`` is row/column ``i - 1``.
    """
    W = np.zeros((graph.num_nodes, graph.num_nodes))
    w = 1.0 / (1.0 + graph.max_degree)
    for i, j in graph.edges:
        W[i - 1, j - 1] = W[j - 1, i - 1] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


def mw_weights(graph: UGraph) -> np.ndarray:
    """Metropolis weights: ``1 / (1 + max(d_i, d_j))`` on link ``{i, j}``."""
    W = np.zeros((graph.num_nodes, graph.num_nodes))
    for i, j in graph.edges:
        W[i - 1, j - 1] = W[j - 1, i - 1] = 1.0 / (1.0 + max(graph.degree(i), graph.degree(j)))
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


@dataclass
class ConsensusState:
    """Averaged iterates: ``P_bar`` is (N, n, n), ``q_bar`` is (N, n)."""

    P_bar: np.ndarray
    q_bar: np.ndarray
    W: np.ndarray
    rounds: int = 0

    @classmethod
    def from_observations(cls, P: Mapping[int, np.ndarray], q: Mapping[int, np.ndarray], W: np.ndarray) -> "ConsensusState":
        nodes = sorted(P)
        if nodes != list(range(1, len(nodes) + 1)) or W.shape != (len(nodes), len(nodes)):
            raise ValueError("observations must cover nodes 1..N matching W")
        return cls(np.stack([P[i] for i in nodes]).astype(float), np.stack([q[i] for i in nodes]).astype(float), W)

    def estimates(self) -> np.ndarray:
        """Local solutions ``z_i = P_bar_i^{-1} q_bar_i``, shape (N, n)."""
        return solve_spd_many(self.P_bar, self.q_bar)


def consensus_step(state: ConsensusState) -> ConsensusState:
    """One synchronous round ``x_i <- sum_j W_ij x_j`` on both ``P`` and ``q``."""
    P_bar = np.einsum("ij,jab->iab", state.W, state.P_bar)
    # keep exact symmetry; the product preserves it only up to rounding
    P_bar = (P_bar + np.swapaxes(P_bar, 1, 2)) / 2.0
    q_bar = state.W @ state.q_bar
    return replace(state, P_bar=P_bar, q_bar=q_bar, rounds=state.rounds + 1)


# -- transmission accounting --------------------------------------------------

ALGORITHMS = ("PE", "GE", "MDW", "MW", "FLOODING")


def sym_size(n: int) -> int:
    """Reals needed to send one symmetric n x n matrix."""
    return n * (n + 1) // 2


@dataclass(frozen=True)
class TxEvent:
    """A costed action.

    ``phase`` is ``init``, ``iteration`` or (flooding only) ``total``.
    ``group_size`` is ``|N_i| + 1`` for a GE iteration initiated by node i.
    """

    algorithm: str
    phase: str
    n: int
    num_nodes: int = 0
    group_size: int = 0


def tx_cost(event: TxEvent) -> int:
    """Real-number transmissions for ``event``."""
    alg, phase, n, N = event.algorithm.upper(), event.phase, event.n, event.num_nodes
    if n < 1:
        raise ValueError("n must be positive")
    if (alg, phase) in (("PE", "init"), ("GE", "init")):
        return sym_size(n) * N
    if (alg, phase) == ("PE", "iteration"):
        return 2 * n
    if (alg, phase) == ("GE", "iteration"):
        if event.group_size < 1:
            raise ValueError("GE iteration needs group_size = |N_i| + 1")
        return n * event.group_size
    if alg in ("MDW", "MW") and phase == "init":
        return 0
    if alg in ("MDW", "MW") and phase == "iteration":
        return (sym_size(n) + n) * N
    if (alg, phase) == ("FLOODING", "total"):
        return (sym_size(n) + n) * N * N
    raise ValueError(f"unknown transmission event: {event}")


@dataclass
class TxLedger:
    """Running transmission totals, with initialization kept separate."""

    init: Counter = field(default_factory=Counter)
    running: Counter = field(default_factory=Counter)
    events: Counter = field(default_factory=Counter)

    def charge(self, event: TxEvent, times: int = 1) -> int:
        cost = tx_cost(event) * times
        bucket = self.init if event.phase == "init" else self.running
        bucket[event.algorithm.upper()] += cost
        self.events[event] += times
        return cost

    def total(self, algorithm: str) -> int:
        alg = algorithm.upper()
        return self.init[alg] + self.running[alg]

    def recount(self, algorithm: str) -> int:
        """Total recomputed from the logged events (cross-check for :meth:`total`)."""
        alg = algorithm.upper()
        return sum(tx_cost(e) * c for e, c in self.events.items() if e.algorithm.upper() == alg)
