"""Agent action sequences and membership dynamics.

An action sequence fixes the founders and, for every time ``k >= 1``, the
agents that join, interact and leave. Sequences are stored as a finite list
of steps, optionally followed by an infinite repetition of the last
``period`` steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Iterable, Iterator, List, Optional, Tuple

import numpy as np

AgentSet = FrozenSet[int]


class InvalidActionError(ValueError):
    """An action step is inconsistent with the membership it is applied to."""

    def __init__(self, violation: "Violation"):
        super().__init__(str(violation))
        self.violation = violation


@dataclass(frozen=True)
class Violation:
    k: int
    clause: str
    detail: str = ""

    def __str__(self) -> str:
        text = f"k={self.k}: {self.clause}"
        return f"{text} ({self.detail})" if self.detail else text


def _ids(values: Iterable[int]) -> AgentSet:
    return frozenset(int(v) for v in values)


@dataclass(frozen=True)
class ActionStep:
    """Who joins, interacts and leaves at one time step."""

    join: AgentSet = frozenset()
    interact: AgentSet = frozenset()
    leave: AgentSet = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "join", _ids(self.join))
        object.__setattr__(self, "interact", _ids(self.interact))
        object.__setattr__(self, "leave", _ids(self.leave))

    @property
    def changes_membership(self) -> bool:
        return bool(self.join or self.leave)

    @property
    def sources(self) -> AgentSet:
        """Agents whose old state feeds the update (interacting and leaving)."""
        return self.interact | self.leave

    @property
    def receivers(self) -> AgentSet:
        """Agents that hold the new state afterwards (joining and interacting)."""
        return self.join | self.interact

    def violations(self, members: AgentSet, k: int, num_agents: Optional[int] = None) -> List[Violation]:
        """Check this step against the membership ``members`` at time ``k - 1``."""
        out = []
        if not self.interact:
            out.append(Violation(k, "I(k) nonempty"))
        if (self.join & self.interact) or (self.join & self.leave) or (self.interact & self.leave):
            out.append(Violation(k, "J(k), I(k), L(k) pairwise disjoint"))
        if num_agents is not None:
            everyone = self.join | self.interact | self.leave
            bad = sorted(i for i in everyone if not 1 <= i <= num_agents)
            if bad:
                out.append(Violation(k, "agent ids in 1..M", f"out of range: {bad}"))
        if self.join & members:
            out.append(Violation(k, "J(k) subset of non-members", f"already members: {sorted(self.join & members)}"))
        stray = (self.interact | self.leave) - members
        if stray:
            out.append(Violation(k, "I(k) and L(k) subsets of members", f"not members: {sorted(stray)}"))
        if self.leave >= members:
            out.append(Violation(k, "L(k) proper subset of members"))
        return out

    def apply(self, members: AgentSet) -> AgentSet:
        return (members | self.join) - self.leave

    def to_json(self) -> dict:
        return {
            "join": sorted(self.join),
            "interact": sorted(self.interact),
            "leave": sorted(self.leave),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ActionStep":
        return cls(doc.get("join", ()), doc.get("interact", ()), doc.get("leave", ()))


@dataclass(frozen=True)
class ActionSequence:
    """Founders plus the per-step actions ``(J(k), I(k), L(k))`` for ``k = 1..K``.

    With ``period=p`` the sequence is infinite: for ``k > K`` the step at
    ``k`` equals the step at ``k - p``.
    """

    num_agents: int
    founders: AgentSet
    steps: Tuple[ActionStep, ...] = ()
    period: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "founders", _ids(self.founders))
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.num_agents < 1:
            raise ValueError("num_agents must be positive")
        if not self.founders:
            raise ValueError("founders must be nonempty")
        bad = sorted(i for i in self.founders if not 1 <= i <= self.num_agents)
        if bad:
            raise ValueError(f"founder ids out of range 1..{self.num_agents}: {bad}")
        if self.period is not None and not 1 <= self.period <= len(self.steps):
            raise ValueError(f"period must be in 1..{len(self.steps)}, got {self.period}")

    @property
    def prefix_length(self) -> int:
        return len(self.steps)

    @property
    def is_periodic(self) -> bool:
        return self.period is not None

    @property
    def horizon(self) -> Optional[int]:
        """Last defined time index, or None when the sequence is infinite."""
        return None if self.period else len(self.steps)

    @property
    def agents(self) -> range:
        return range(1, self.num_agents + 1)

    def step(self, k: int) -> ActionStep:
        """Actions taken at time ``k >= 1``."""
        K = len(self.steps)
        if k < 1:
            raise IndexError("steps are indexed from k = 1")
        if k <= K:
            return self.steps[k - 1]
        if self.period is None:
            raise IndexError(f"k={k} beyond the end of a non-periodic sequence (K={K})")
        return self.steps[K - self.period + (k - K - 1) % self.period]

    def phase(self, k: int) -> Optional[int]:
        """Position in the repeating block of the step *after* time ``k``.

        Defined once ``k >= K - p``; two times with equal phase are followed
        by identical step streams.
        """
        if self.period is None:
            return None
        start = len(self.steps) - self.period
        return (k - start) % self.period if k >= start else None

    def iter_steps(self, start: int = 1, stop: Optional[int] = None) -> Iterator[Tuple[int, ActionStep]]:
        k = start
        end = self.horizon if stop is None else stop
        while end is None or k <= end:
            yield k, self.step(k)
            k += 1

    def unrolled(self, K: int) -> "ActionSequence":
        """Explicit, non-periodic copy holding steps ``1..K``."""
        return ActionSequence(self.num_agents, self.founders, tuple(self.step(k) for k in range(1, K + 1)))

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "M": self.num_agents,
            "founders": sorted(self.founders),
            "steps": [s.to_json() for s in self.steps],
            "period": self.period,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ActionSequence":
        return cls(
            num_agents=int(doc["M"]),
            founders=doc["founders"],
            steps=tuple(ActionStep.from_json(s) for s in doc.get("steps", [])),
            period=doc.get("period"),
        )

    def dump(self, path) -> None:
        # one step per line keeps long sequences diffable
        doc = self.to_json()
        steps = ",\n    ".join(json.dumps(s) for s in doc["steps"])
        text = (
            f'{{\n  "M": {doc["M"]},\n  "founders": {json.dumps(doc["founders"])},\n'
            f'  "steps": [\n    {steps}\n  ],\n  "period": {json.dumps(doc["period"])}\n}}\n'
        )
        Path(path).write_text(text, encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ActionSequence":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def validate_action_sequence(seq: ActionSequence, horizon: Optional[int] = None) -> List[Violation]:
    """Return every constraint violation for ``k = 1..horizon`` (empty list: ok).

    ``horizon`` defaults to the stored prefix length (for periodic sequences,
    the prefix plus one extra period, which is enough to exercise every
    stored step at least once in periodic position).
    """
    if horizon is None:
        horizon = len(seq.steps) + (seq.period or 0)
    if seq.horizon is not None and horizon > seq.horizon:
        return [Violation(seq.horizon + 1, "step defined", f"sequence ends at K={seq.horizon}")]
    out: List[Violation] = []
    members = seq.founders
    for k in range(1, horizon + 1):
        step = seq.step(k)
        problems = step.violations(members, k, seq.num_agents)
        out.extend(problems)
        if problems:
            # later checks would be measured against a corrupted membership
            break
        members = step.apply(members)
    return out


def membership_trace(seq: ActionSequence, k_max: int) -> List[AgentSet]:
    """Members ``M(0), ..., M(k_max)``; raises on the first invalid step."""
    members = seq.founders
    trace = [members]
    for k in range(1, k_max + 1):
        step = seq.step(k)
        problems = step.violations(members, k, seq.num_agents)
        if problems:
            raise InvalidActionError(problems[0])
        members = step.apply(members)
        trace.append(members)
    return trace


def membership_at(seq: ActionSequence, k: int) -> AgentSet:
    """Member set ``M(k)`` from ``M(0) = F`` and ``M(k) = (M(k-1) | J(k)) - L(k)``."""
    if k < 0:
        raise IndexError("k must be nonnegative")
    return membership_trace(seq, k)[-1]


@dataclass
class Churn:
    """Randomness knobs for volatile sequences.

    Each non-member joins independently with ``join_prob``; each member not
    chosen to interact leaves independently with ``leave_prob``; the number
    of interacting members is uniform on ``interact_min..min(interact_max, |M|)``.
    """

    join_prob: float = 0.05
    leave_prob: float = 0.05
    interact_min: int = 1
    interact_max: int = 5

    def __post_init__(self):
        for name in ("join_prob", "leave_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        if not 1 <= self.interact_min <= self.interact_max:
            raise ValueError("need 1 <= interact_min <= interact_max")


def random_volatile_sequence(
    num_agents: int,
    founders: Iterable[int],
    horizon: int,
    churn: Optional[Churn] = None,
    seed=None,
) -> ActionSequence:
    """Random action sequence with membership churn.

    Draw order per step: the interacting set from the current members, then
    the leavers from the remaining members, then the joiners from the
    non-members. Every draw satisfies the model constraints by construction.
    """
    churn = churn or Churn()
    rng = np.random.default_rng(seed)
    founders = _ids(founders)
    ActionSequence(num_agents, founders)  # validates founders
    everyone = np.arange(1, num_agents + 1)
    members = founders
    steps = []
    for _ in range(horizon):
        pool = np.array(sorted(members))
        hi = min(churn.interact_max, len(pool))
        lo = min(churn.interact_min, hi)
        size = int(rng.integers(lo, hi + 1))
        interact = _ids(rng.choice(pool, size=size, replace=False))
        rest = np.array(sorted(members - interact), dtype=int)
        leave = _ids(rest[rng.random(rest.size) < churn.leave_prob])
        outside = everyone[~np.isin(everyone, pool)]
        join = _ids(outside[rng.random(outside.size) < churn.join_prob])
        step = ActionStep(join, interact, leave)
        steps.append(step)
        members = step.apply(members)
    return ActionSequence(num_agents, founders, tuple(steps))


def action_class(step: ActionStep, previous_members: AgentSet, agent: int) -> str:
    """Which of the five per-agent actions ``agent`` takes in ``step``."""
    if agent in step.join:
        return "join"
    if agent in step.interact:
        return "interact"
    if agent in step.leave:
        return "leave"
    if agent in previous_members:
        return "member-idle"
    return "nonmember-idle"
