"""Subset Equalizing state machine and its convergence monitors.

Each member ``i`` holds an estimate ``z[i]`` and a weight matrix ``Q[i]``.
At every step the joining and interacting agents all adopt the
``Q``-weighted mean of the interacting and leaving agents' estimates; if
membership changes, they also split the leaving and interacting ``Q`` mass
evenly among themselves. Both ``sum Q_i z_i`` and ``sum Q_i`` over members
are invariant, so any consensus is the solution of
``(sum P_i) z = sum q_i``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .actions import ActionSequence, ActionStep, AgentSet, InvalidActionError
from .spd import require_spd, solve_spd, spectral_radius

CONSERVATION_RTOL = 1e-9
TRACE_COLUMNS = ("k", "num_members", "V", "max_error", "min_eigenvalue")


class ConservationError(AssertionError):
    """The conserved sums drifted: an implementation bug, never expected."""


def _check_shapes(P: Mapping[int, np.ndarray], q: Mapping[int, np.ndarray]) -> int:
    if not P:
        raise ValueError("need at least one observation")
    if set(P) != set(q):
        raise ValueError("P and q must have the same agents")
    n = None
    for i in P:
        A, b = np.shape(P[i]), np.shape(q[i])
        if n is None:
            n = A[0]
        if A != (n, n) or b != (n,):
            raise ValueError(f"agent {i}: dimension mismatch, P {A}, q {b}, expected n={n}")
    return n


def ground_truth(P: Mapping[int, np.ndarray], q: Mapping[int, np.ndarray]) -> np.ndarray:
    """Solution ``z`` of ``(sum_i P_i) z = sum_i q_i``."""
    _check_shapes(P, q)
    for i in P:
        require_spd(P[i])
    return solve_spd(sum(np.asarray(P[i], float) for i in P), sum(np.asarray(q[i], float) for i in q))


@dataclass
class NetworkState:
    """Member slots at time ``k`` plus the sums that must never change.

    Non-members simply have no entry in ``z`` / ``Q``. ``truth`` is used only
    by the monitors below; :func:`se_step` never reads it.
    """

    k: int
    z: Dict[int, np.ndarray]
    Q: Dict[int, np.ndarray]
    conserved_Qz: np.ndarray
    conserved_Q: np.ndarray
    truth: np.ndarray
    scale_Qz: float = 1.0
    scale_Q: float = 1.0

    @property
    def members(self) -> AgentSet:
        return frozenset(self.z)

    @property
    def n(self) -> int:
        return self.truth.shape[0]

    @property
    def beta(self) -> float:
        """Spectral radius of ``sum_i P_i`` (upper bound on every ``Q_i``)."""
        return spectral_radius(self.conserved_Q)

    def conservation_residuals(self) -> Tuple[float, float]:
        """Relative drift of ``sum Q_i z_i`` and ``sum Q_i``.

        Each residual is normalized by the magnitude of the initial terms
        (``sum ||q_i||`` and ``sum ||P_i||_F``), the natural scale of
        floating-point summation error.
        """
        Qz = sum(self.Q[i] @ self.z[i] for i in self.z)
        Qs = sum(self.Q[i] for i in self.Q)
        r1 = np.linalg.norm(Qz - self.conserved_Qz) / self.scale_Qz
        r2 = np.linalg.norm(Qs - self.conserved_Q) / self.scale_Q
        return float(r1), float(r2)

    def check_conservation(self, rtol: float = CONSERVATION_RTOL) -> None:
        r1, r2 = self.conservation_residuals()
        if not (r1 <= rtol and r2 <= rtol):
            raise ConservationError(f"k={self.k}: conservation residuals {r1:.3g} (Qz), {r2:.3g} (Q) exceed {rtol:g}")


def se_init(
    P: Mapping[int, np.ndarray],
    q: Mapping[int, np.ndarray],
    founders: Optional[Iterable[int]] = None,
) -> NetworkState:
    """Initial state: ``z_i = P_i^{-1} q_i`` and ``Q_i = P_i`` for founders."""
    _check_shapes(P, q)
    if founders is not None and set(founders) != set(P):
        raise ValueError("observations must be given for exactly the founders")
    z, Q = {}, {}
    for i in sorted(P):
        Pi = require_spd(P[i])
        Q[i] = Pi
        z[i] = solve_spd(Pi, np.asarray(q[i], float))
    conserved_Q = sum(Q.values())
    conserved_Qz = sum(np.asarray(q[i], float) for i in q)
    return NetworkState(
        k=0,
        z=z,
        Q=Q,
        conserved_Qz=conserved_Qz,
        conserved_Q=conserved_Q,
        truth=solve_spd(conserved_Q, conserved_Qz),
        scale_Qz=max(sum(float(np.linalg.norm(q[i])) for i in q), 1e-300),
        scale_Q=max(sum(float(np.linalg.norm(Q[i])) for i in Q), 1e-300),
    )


def weighted_mean(state: NetworkState, X: Iterable[int]) -> np.ndarray:
    """``(sum_{i in X} Q_i)^{-1} sum_{i in X} Q_i z_i`` over members ``X``."""
    X = sorted(set(X))
    if not X:
        raise ValueError("X must be nonempty")
    missing = [i for i in X if i not in state.z]
    if missing:
        raise ValueError(f"not members at k={state.k}: {missing}")
    if len(X) == 1:
        return state.z[X[0]].copy()
    Qsum = sum(state.Q[i] for i in X)
    Qz = sum(state.Q[i] @ state.z[i] for i in X)
    return solve_spd(Qsum, Qz)


def se_step(state: NetworkState, step: ActionStep, check: bool = True) -> NetworkState:
    """Apply one step of Subset Equalizing and return the new state.

    ``check`` re-verifies the conservation invariants afterwards and raises
    :class:`ConservationError` on drift.
    """
    problems = step.violations(state.members, state.k + 1)
    if problems:
        raise InvalidActionError(problems[0])
    sources = sorted(step.sources)
    z_new = weighted_mean(state, sources)
    z = dict(state.z)
    Q = dict(state.Q)
    for i in step.leave:
        del z[i]
        del Q[i]
    receivers = sorted(step.receivers)
    if step.changes_membership:
        Q_new = sum(state.Q[j] for j in sources) / len(receivers)
        for i in receivers:
            Q[i] = Q_new
    for i in receivers:
        z[i] = z_new
    new = replace(state, k=state.k + 1, z=z, Q=Q)
    if check:
        new.check_conservation()
    return new


def lyapunov(state: NetworkState) -> float:
    """``V = sum_i (z_i - z)^T Q_i (z_i - z)`` over members."""
    total = 0.0
    for i, zi in state.z.items():
        e = zi - state.truth
        total += float(e @ state.Q[i] @ e)
    return total


def member_errors(state: NetworkState) -> Dict[int, float]:
    return {i: float(np.linalg.norm(zi - state.truth)) for i, zi in state.z.items()}


def _eig_extremes(state: NetworkState) -> Tuple[float, float]:
    stack = np.stack([state.Q[i] for i in sorted(state.Q)])
    lam = np.linalg.eigvalsh(stack)
    return float(lam[:, 0].min()), float(lam[:, -1].max())


@dataclass
class LyapunovTrace:
    """Per-step monitoring record.

    ``max_eigenvalue`` is the largest eigenvalue of any member ``Q_i``; it is
    kept for the upper-bound check but not written to CSV.
    """

    k: List[int] = field(default_factory=list)
    num_members: List[int] = field(default_factory=list)
    V: List[float] = field(default_factory=list)
    max_error: List[float] = field(default_factory=list)
    min_error: List[float] = field(default_factory=list)
    min_eigenvalue: List[float] = field(default_factory=list)
    max_eigenvalue: List[float] = field(default_factory=list)
    beta: float = math.nan

    def record(self, state: NetworkState, eigen: bool = True) -> None:
        errs = member_errors(state).values()
        self.k.append(state.k)
        self.num_members.append(len(state.z))
        self.V.append(lyapunov(state))
        self.max_error.append(max(errs))
        self.min_error.append(min(errs))
        lo, hi = _eig_extremes(state) if eigen else (math.nan, math.nan)
        self.min_eigenvalue.append(lo)
        self.max_eigenvalue.append(hi)

    def __len__(self) -> int:
        return len(self.k)

    def rows(self):
        for idx in range(len(self.k)):
            yield tuple(getattr(self, col)[idx] for col in TRACE_COLUMNS)

    def to_csv(self, fh=None) -> str:
        """Write the trace as CSV (``TRACE_COLUMNS``); returns the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for k, m, V, err, lam in self.rows():
            writer.writerow([k, m, repr(float(V)), repr(float(err)), repr(float(lam))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def simulate(
    P: Mapping[int, np.ndarray],
    q: Mapping[int, np.ndarray],
    seq: ActionSequence,
    horizon: Optional[int] = None,
    check: bool = True,
    eigen: bool = True,
) -> Tuple[NetworkState, LyapunovTrace, List[NetworkState]]:
    """Run SE over ``seq`` for ``horizon`` steps, recording every state."""
    if horizon is None:
        if seq.horizon is None:
            raise ValueError("horizon required for periodic sequences")
        horizon = seq.horizon
    state = se_init(P, q, seq.founders)
    trace = LyapunovTrace(beta=state.beta)
    trace.record(state, eigen)
    states = [state]
    for k in range(1, horizon + 1):
        state = se_step(state, seq.step(k), check=check)
        trace.record(state, eigen)
        states.append(state)
    return state, trace, states


def contraction_factor(M: int, alpha: float, beta: float) -> float:
    """Guaranteed per-window shrink factor of ``V``.

    ``c / (c + 1)`` with ``c = (4 beta / alpha)^(M-1) * M * M!``, evaluated
    in log space so large ``M`` does not overflow.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if beta < alpha:
        raise ValueError("beta must be at least alpha")
    log_c = (M - 1) * math.log(4.0 * beta / alpha) + math.log(M) + math.lgamma(M + 1)
    return 1.0 / (1.0 + math.exp(-log_c))


def rate_envelope(
    V0: float,
    M: int,
    alpha: float,
    beta: float,
    h_star: int,
    k: int,
    radius: bool = False,
) -> float:
    """Upper bound ``V0 * factor ** floor(k / h_star)`` on ``V(k)``.

    With ``radius=True`` the bound is divided by ``alpha``, bounding the
    squared estimation error of every member.
    """
    if h_star < 1:
        raise ValueError("h_star must be at least 1")
    if k < 0 or V0 < 0:
        raise ValueError("k and V0 must be nonnegative")
    bound = V0 * contraction_factor(M, alpha, beta) ** (k // h_star)
    return bound / alpha if radius else bound


@dataclass(frozen=True)
class UpdEvidence:
    alpha_hat: float
    series: Tuple[float, ...]
    beta: float
    bounded_above: bool


def upd_evidence(trace: LyapunovTrace, horizon: Optional[int] = None, start: int = 0, atol: float = 1e-9) -> UpdEvidence:
    """Observed lower bound on member ``Q_i`` eigenvalues over ``start..horizon``.

    Also reports whether every member ``Q_i`` stayed below ``beta I``
    (within ``atol``).
    """
    if not len(trace):
        raise ValueError("empty trace")
    stop = len(trace) - 1 if horizon is None else min(horizon, len(trace) - 1)
    lows = tuple(trace.min_eigenvalue[start : stop + 1])
    highs = trace.max_eigenvalue[start : stop + 1]
    return UpdEvidence(
        alpha_hat=min(lows),
        series=lows,
        beta=trace.beta,
        bounded_above=all(h <= trace.beta + atol for h in highs),
    )
