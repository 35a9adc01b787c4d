"""Connectivity of an agent network under an action sequence.

For an origin time ``k`` each member starts in its own block; every step
merges the blocks touched by the interacting and leaving agents together
with the joiners, then drops the leavers. ``h(k)`` is the number of steps
until a single block covers all members, and ``h*`` is its supremum.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import networkx as nx

from .actions import ActionSequence, ActionStep, AgentSet, InvalidActionError, membership_trace

Blocks = FrozenSet[FrozenSet[int]]


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionState:
    """Distinct blocks ``C_i(origin, at)`` over the members at time ``at``."""

    at: int
    origin: int
    blocks: Blocks

    @property
    def members(self) -> AgentSet:
        return frozenset().union(*self.blocks)

    @property
    def covered(self) -> bool:
        """True when one block holds every member, i.e. ``at`` is in ``D_origin``."""
        return len(self.blocks) == 1

    def block_of(self, agent: int) -> FrozenSet[int]:
        """``C_agent(origin, at)``; empty for non-members."""
        for block in self.blocks:
            if agent in block:
                return block
        return frozenset()

    def sorted_blocks(self) -> List[List[int]]:
        return sorted(sorted(b) for b in self.blocks)


def _initial(members: AgentSet, k: int) -> PartitionState:
    return PartitionState(k, k, frozenset(frozenset([i]) for i in members))


def partition_init(seq: ActionSequence, k: int) -> PartitionState:
    """Singleton blocks for every member of ``M(k)``."""
    return _initial(membership_trace(seq, k)[-1], k)


def partition_step(state: PartitionState, step: ActionStep) -> PartitionState:
    """Advance the block family by one time step."""
    members = state.members
    problems = step.violations(members, state.at + 1)
    if problems:
        raise InvalidActionError(problems[0])
    touched = step.interact | step.leave
    merged = set(step.join)
    untouched = []
    for block in state.blocks:
        if block & touched:
            merged |= block
        else:
            untouched.append(block)
    merged -= step.leave
    blocks = frozenset(untouched + [frozenset(merged)])
    return PartitionState(state.at + 1, state.origin, blocks)


class HKind(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class HValue:
    """``h(k)``: a finite count, a certified infinity, or unresolved within ``horizon`` steps."""

    kind: HKind
    value: Optional[int] = None
    horizon: Optional[int] = None

    @property
    def is_finite(self) -> bool:
        return self.kind is HKind.FINITE

    def to_json(self):
        if self.kind is HKind.FINITE:
            return self.value
        if self.kind is HKind.INFINITE:
            return "inf"
        return {"unresolved": self.horizon}


def default_horizon(seq: ActionSequence) -> Optional[int]:
    """``10 * M * K`` for finite sequences, unbounded for periodic ones.

    Periodic searches always terminate through cycle detection.
    """
    if seq.is_periodic:
        return None
    return 10 * seq.num_agents * max(seq.prefix_length, 1)


def _h_from(seq: ActionSequence, k: int, members: AgentSet, horizon: Optional[int]) -> HValue:
    state = _initial(members, k)
    seen = set()
    end = seq.horizon
    ell = k
    while True:
        if state.covered:
            return HValue(HKind.FINITE, ell - k)
        phase = seq.phase(ell)
        if phase is not None:
            # the future from here depends only on (phase, blocks): a repeat
            # before coverage means coverage never happens
            key = (phase, state.blocks)
            if key in seen:
                return HValue(HKind.INFINITE)
            seen.add(key)
        if horizon is not None and ell - k >= horizon:
            return HValue(HKind.UNRESOLVED, horizon=horizon)
        if end is not None and ell >= end:
            return HValue(HKind.UNRESOLVED, horizon=ell - k)
        state = partition_step(state, seq.step(ell + 1))
        ell += 1


def h_of(seq: ActionSequence, k: int, horizon: Optional[int] = -1) -> HValue:
    """Smallest ``l - k`` such that one block covers ``M(l)``.

    ``horizon`` caps the search at ``l <= k + horizon``; the default ``-1``
    selects :func:`default_horizon` and ``None`` means no cap (only sensible
    for periodic sequences).
    """
    if horizon == -1:
        horizon = default_horizon(seq)
    if horizon is not None and horizon < 0:
        raise ValueError("horizon must be nonnegative")
    return _h_from(seq, k, membership_trace(seq, k)[-1], horizon)


@dataclass(frozen=True)
class HStar:
    """Worst-case connectedness over a window of origins.

    kind is one of ``finite``, ``infinite``, ``unbounded-evidence`` or
    ``unresolved``. A finite value is ``certified`` when the sequence is
    periodic and the window already covers a full cycle of origin states,
    so no later origin can exceed it.
    """

    kind: str
    value: Optional[int] = None
    certified: bool = False

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value, "certified": self.certified}


@dataclass
class ConnectivityReport:
    h_values: Dict[int, HValue] = field(default_factory=dict)
    h_star: Optional[HStar] = None

    def to_json(self) -> dict:
        return {
            "h_values": {str(k): v.to_json() for k, v in sorted(self.h_values.items())},
            "h_star": None if self.h_star is None else self.h_star.to_json(),
        }


def _looks_unbounded(values: List[int]) -> bool:
    # strictly rising record highs, the latest in the final third of the window
    records, best, last_at = 0, -1, 0
    for k, v in enumerate(values):
        if v > best:
            if best >= 0:
                records += 1
            best, last_at = v, k
    return records >= 3 and last_at >= (2 * (len(values) - 1)) // 3


def h_star(seq: ActionSequence, window: int, horizon: Optional[int] = -1) -> ConnectivityReport:
    """``sup h(k)`` over origins ``k = 0..window``."""
    if horizon == -1:
        horizon = default_horizon(seq)
    trace = membership_trace(seq, window)
    values: Dict[int, HValue] = {}
    origin_states = set()
    cycle_closed = False
    for k in range(window + 1):
        values[k] = _h_from(seq, k, trace[k], horizon)
        phase = seq.phase(k)
        if phase is not None:
            key = (phase, trace[k])
            cycle_closed = cycle_closed or key in origin_states
            origin_states.add(key)
    report = ConnectivityReport(values)
    kinds = {v.kind for v in values.values()}
    if HKind.INFINITE in kinds:
        report.h_star = HStar("infinite", certified=True)
    elif HKind.UNRESOLVED in kinds:
        report.h_star = HStar("unresolved")
    else:
        finite = [values[k].value for k in range(window + 1)]
        best = max(finite)
        if cycle_closed:
            report.h_star = HStar("finite", best, certified=True)
        elif _looks_unbounded(finite):
            report.h_star = HStar("unbounded-evidence", best)
        else:
            report.h_star = HStar("finite", best)
    return report


def interaction_edges(seq: ActionSequence) -> set:
    """Pairs that interact together inside one period (recurring forever)."""
    if not seq.is_periodic:
        raise PreconditionError("recurring edges need a periodic sequence")
    K = seq.prefix_length
    edges = set()
    for k in range(K - seq.period + 1, K + 1):
        edges.update(itertools.combinations(sorted(seq.step(k).interact), 2))
    return edges


def einfty_equivalence(seq: ActionSequence) -> Tuple[bool, bool]:
    """Connectivity of a static-membership periodic network, decided two ways.

    Returns ``(connected_by_h, connected_by_graph)``: the first from ``h(k)``
    over every distinct origin, the second from the graph on the founders
    whose edges are the pairs that interact infinitely often.
    """
    if not seq.is_periodic:
        raise PreconditionError("sequence must be periodic")
    for k, step in enumerate(seq.steps, start=1):
        if step.changes_membership:
            raise PreconditionError(f"membership changes at k={k}; joins and leaves must be empty")
    # origins k >= K all repeat earlier (phase, membership) states
    by_h = all(
        _h_from(seq, k, seq.founders, None).is_finite for k in range(seq.prefix_length + 1)
    )
    graph = nx.Graph()
    graph.add_nodes_from(seq.founders)
    graph.add_edges_from(interaction_edges(seq))
    return by_h, nx.is_connected(graph)
