"""Experiment pipelines: the volatile-network run and the wireless sweeps."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .actions import ActionSequence, Churn, action_class, random_volatile_sequence
from .baselines import ConsensusState, TxEvent, TxLedger, consensus_step, mdw_weights, mw_weights
from .core import LyapunovTrace, se_init, se_step
from .spd import random_spd
from .topology import UGraph, links_for_degree, random_geometric, uniform_scheduler

log = logging.getLogger(__name__)

STEP_CAP = 10**6
SWEEP_COLUMNS = ("param_value", "algorithm", "mean_transmissions", "mean_iterations", "scenarios_converged")
SWEEP_PARAMS = ("N", "avg_degree", "n")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Inputs for one experiment.

    ``kind="volatile"`` uses ``M``, ``founders``, ``horizon``, ``n``,
    ``churn`` and ``tracked``. ``kind="sweep"`` varies one of
    ``N``/``avg_degree``/``n`` over ``values`` around ``base`` and runs each
    of ``algorithms`` on ``scenarios`` random networks.
    """

    kind: str
    seed: int = 1
    scenarios: int = 10
    threshold: float = 0.005
    output: Optional[str] = None
    # volatile
    M: int = 100
    founders: List[int] = field(default_factory=lambda: list(range(1, 51)))
    horizon: int = 1000
    n: int = 4
    churn: Churn = field(default_factory=Churn)
    tracked: List[int] = field(default_factory=lambda: [1, 51])
    # sweep
    vary: str = "N"
    values: List[float] = field(default_factory=lambda: [50])
    base: Dict[str, float] = field(default_factory=lambda: {"N": 200, "avg_degree": 20, "n": 4})
    algorithms: List[str] = field(default_factory=lambda: ["PE", "GE", "MDW", "MW", "FLOODING"])
    step_cap: int = STEP_CAP

    def __post_init__(self):
        if isinstance(self.churn, dict):
            self.churn = Churn(**self.churn)
        if isinstance(self.founders, int):
            self.founders = list(range(1, self.founders + 1))
        self.algorithms = [a.upper() for a in self.algorithms]
        self.validate()

    def validate(self) -> None:
        if self.kind not in ("volatile", "sweep"):
            raise ConfigError(f"kind must be 'volatile' or 'sweep', got {self.kind!r}")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        if self.scenarios < 1:
            raise ConfigError("scenarios must be at least 1")
        if self.kind == "volatile":
            if self.M < 2 or self.n < 1 or self.horizon < 0:
                raise ConfigError("need M >= 2, n >= 1, horizon >= 0")
            if not self.founders or not all(1 <= i <= self.M for i in self.founders):
                raise ConfigError(f"founders must be a nonempty subset of 1..{self.M}")
        else:
            if self.vary not in SWEEP_PARAMS:
                raise ConfigError(f"vary must be one of {SWEEP_PARAMS}")
            missing = set(SWEEP_PARAMS) - set(self.base)
            if missing:
                raise ConfigError(f"base is missing {sorted(missing)}")
            unknown = set(self.algorithms) - {"PE", "GE", "MDW", "MW", "FLOODING"}
            if unknown:
                raise ConfigError(f"unknown algorithms {sorted(unknown)}")
            if not self.values:
                raise ConfigError("values must be nonempty")
            for point in self.points():
                try:
                    links_for_degree(point["N"], point["avg_degree"])
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
                if point["n"] < 1 or point["N"] < 2:
                    raise ConfigError(f"bad sweep point {point}")

    def points(self) -> List[Dict[str, float]]:
        out = []
        for v in self.values:
            point = dict(self.base)
            point[self.vary] = v
            point["N"], point["n"] = int(point["N"]), int(point["n"])
            out.append(point)
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "kind" not in doc:
            raise ConfigError("config needs a 'kind'")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from None
        return cls.from_json(doc)


def random_observations(agents: Sequence[int], n: int, rng) -> tuple:
    """``P_i = X_i^T X_i`` and ``q_i`` with standard-normal entries."""
    rng = np.random.default_rng(rng)
    P, q = {}, {}
    for i in sorted(agents):
        P[i] = random_spd(n, rng)
        q[i] = rng.standard_normal(n)
    return P, q


# -- volatile network ---------------------------------------------------------


@dataclass
class RunTrace:
    sequence: ActionSequence
    trace: LyapunovTrace
    actions: Dict[int, List[str]]

    def to_csv(self) -> str:
        return self.trace.to_csv()

    def actions_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "agent", "action"])
        for agent, classes in sorted(self.actions.items()):
            for k, name in enumerate(classes, start=1):
                writer.writerow([k, agent, name])
        return buf.getvalue()


def run_volatile(config: ScenarioConfig, check: bool = True, eigen: bool = True) -> RunTrace:
    """SE on a randomly churning agent network."""
    if config.kind != "volatile":
        raise ConfigError("run_volatile needs kind='volatile'")
    seq = random_volatile_sequence(config.M, config.founders, config.horizon, config.churn, seed=[config.seed, 0])
    P, q = random_observations(seq.founders, config.n, [config.seed, 1])
    state = se_init(P, q, seq.founders)
    trace = LyapunovTrace(beta=state.beta)
    trace.record(state, eigen)
    actions = {a: [] for a in config.tracked}
    for k in range(1, config.horizon + 1):
        step = seq.step(k)
        for a in actions:
            actions[a].append(action_class(step, state.members, a))
        state = se_step(state, step, check=check)
        trace.record(state, eigen)
    return RunTrace(seq, trace, actions)


# -- wireless sweeps ----------------------------------------------------------


@dataclass(frozen=True)
class AlgorithmResult:
    transmissions: int
    iterations: int
    converged: bool


def run_gossip(graph: UGraph, P, q, mode: str, rng, threshold: float, step_cap: int, ledger: TxLedger) -> AlgorithmResult:
    """PE or GE until every node is within ``threshold`` of the solution."""
    n = next(iter(P.values())).shape[0]
    N = graph.num_nodes
    ledger.charge(TxEvent(mode, "init", n, N))
    state = se_init(P, q)
    errors = np.array([np.linalg.norm(state.z[i] - state.truth) for i in graph.nodes])
    groups: Counter = Counter()
    iterations = 0
    converged = errors.max() < threshold
    stream = uniform_scheduler(graph, mode, rng)
    while not converged and iterations < step_cap:
        step = next(stream)
        state = se_step(state, step, check=False)
        iterations += 1
        groups[len(step.interact)] += 1
        err = float(np.linalg.norm(state.z[min(step.interact)] - state.truth))
        for i in step.interact:
            errors[i - 1] = err
        converged = errors.max() < threshold
    for size, count in sorted(groups.items()):
        ledger.charge(TxEvent(mode, "iteration", n, N, group_size=size), count)
    return AlgorithmResult(ledger.total(mode), iterations, bool(converged))


def run_consensus(graph: UGraph, P, q, mode: str, threshold: float, step_cap: int, ledger: TxLedger) -> AlgorithmResult:
    """MDW or MW rounds until every node's local solve is within ``threshold``."""
    n = next(iter(P.values())).shape[0]
    N = graph.num_nodes
    W = mdw_weights(graph) if mode == "MDW" else mw_weights(graph)
    truth = se_init(P, q).truth
    ledger.charge(TxEvent(mode, "init", n, N))
    state = ConsensusState.from_observations(P, q, W)
    converged = np.linalg.norm(state.estimates() - truth, axis=1).max() < threshold
    while not converged and state.rounds < step_cap:
        state = consensus_step(state)
        converged = np.linalg.norm(state.estimates() - truth, axis=1).max() < threshold
    ledger.charge(TxEvent(mode, "iteration", n, N), state.rounds)
    return AlgorithmResult(ledger.total(mode), state.rounds, bool(converged))


def run_scenario(N: int, L: int, n: int, algorithms: Sequence[str], seed: int, threshold: float, step_cap: int = STEP_CAP) -> Dict[str, AlgorithmResult]:
    """One random network and problem instance, every requested algorithm."""
    graph = random_geometric(N, L, [seed, 0])
    P, q = random_observations(graph.nodes, n, [seed, 1])
    out = {}
    for alg in algorithms:
        ledger = TxLedger()
        if alg in ("PE", "GE"):
            out[alg] = run_gossip(graph, P, q, alg, [seed, 2 if alg == "PE" else 3], threshold, step_cap, ledger)
        elif alg in ("MDW", "MW"):
            out[alg] = run_consensus(graph, P, q, alg, threshold, step_cap, ledger)
        else:
            out[alg] = AlgorithmResult(ledger.charge(TxEvent("FLOODING", "total", n, N)), 0, True)
        assert ledger.total(alg) == ledger.recount(alg) == out[alg].transmissions
    return out


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    algorithm: str
    mean_transmissions: float
    mean_iterations: float
    scenarios_converged: int


def _fmt(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def run_sweep(config: ScenarioConfig) -> List[SweepRow]:
    """Mean transmissions to converge, per sweep point and algorithm.

    Scenario ``s`` uses seed ``config.seed + s``; means are taken over the
    converged scenarios of each cell.
    """
    if config.kind != "sweep":
        raise ConfigError("run_sweep needs kind='sweep'")
    rows = []
    for value, point in zip(config.values, config.points()):
        N, n = point["N"], point["n"]
        L = links_for_degree(N, point["avg_degree"])
        results = [
            run_scenario(N, L, n, config.algorithms, config.seed + s, config.threshold, config.step_cap)
            for s in range(config.scenarios)
        ]
        for alg in config.algorithms:
            done = [r[alg] for r in results if r[alg].converged]
            if len(done) < len(results):
                log.warning("%s=%s %s: %d of %d scenarios hit the step cap", config.vary, value, alg, len(results) - len(done), len(results))
            mean_tx = math.fsum(r.transmissions for r in done) / len(done) if done else math.nan
            mean_it = math.fsum(r.iterations for r in done) / len(done) if done else math.nan
            rows.append(SweepRow(value, alg, mean_tx, mean_it, len(done)))
    return rows
