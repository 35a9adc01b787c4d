"""Exit criteria 1-10. Run with ``pytest tests/test_acceptance.py``; a
PASS/FAIL line per criterion is printed in the terminal summary."""
import time

import numpy as np
import pytest

from subset_equalizing import load_example
from subset_equalizing.actions import ActionSequence, ActionStep, Churn, random_volatile_sequence
from subset_equalizing.baselines import (
    ConsensusState,
    TxEvent,
    TxLedger,
    consensus_step,
    mdw_weights,
    mw_weights,
    tx_cost,
)
from subset_equalizing.connectivity import HKind, einfty_equivalence, h_of, h_star
from subset_equalizing.core import (
    contraction_factor,
    lyapunov,
    rate_envelope,
    se_init,
    se_step,
    simulate,
    upd_evidence,
    weighted_mean,
)
from subset_equalizing.harness import (
    ScenarioConfig,
    random_observations,
    run_consensus,
    run_gossip,
    run_sweep,
    sweep_csv,
)
from subset_equalizing.topology import links_for_degree, random_geometric

pytestmark = pytest.mark.acceptance

# Floating-point allowance on V comparisons, relative to the initial V.
V_SLACK = 1e-12


def _roundoff(V0):
    return V_SLACK * max(1.0, V0)


# -- 1 ------------------------------------------------------------------------


def test_criterion_01_connectivity_goldens():
    start = time.perf_counter()
    ex3 = load_example("example3")
    for k in range(12):
        assert h_of(ex3, k).kind is HKind.INFINITE

    ex4 = load_example("example4")
    for k in range(13):
        assert h_of(ex4, k).value == (2 if k % 2 == 0 else 3)
    star = h_star(ex4, 12).h_star
    assert (star.kind, star.value) == ("finite", 3)

    ex5 = load_example("example5")
    assert h_of(ex5, 0).value == 2
    for ell in range(1, 7):
        assert h_of(ex5, ell * (ell + 1) // 2).value == ell + 1

    fig1 = load_example("figure1")
    assert h_of(fig1, 0).value == 4
    assert time.perf_counter() - start < 1.0


# -- 2 ------------------------------------------------------------------------


def test_criterion_02_nonuniform_pd_closed_forms():
    seq = load_example("example6")
    P = {1: np.array([[1.0]]), 2: np.array([[1.0]])}
    q = {1: np.array([1.0]), 2: np.array([2.0])}
    _, trace, states = simulate(P, q, seq, 60)
    for k, s in enumerate(states):
        ceil_half, floor_half = 0.5 ** -(-k // 2), 0.5 ** (k // 2)
        assert abs(s.Q[1][0, 0] - ceil_half) <= 1e-12
        assert abs(s.Q[2][0, 0] - (2 - floor_half)) <= 1e-12
        assert abs(s.z[1][0] - 1.0) <= 1e-12
        assert abs(s.z[2][0] - (3 - floor_half) / (2 - floor_half)) <= 1e-12
        if k % 2:
            assert abs(s.Q[3][0, 0] - ceil_half) <= 1e-12
            assert abs(s.z[3][0] - 1.0) <= 1e-12
        else:
            assert 3 not in s.z
    assert trace.V[0] == pytest.approx(0.5)
    assert trace.V[60] < 1e-9 * trace.V[0]
    assert states[-1].truth[0] == pytest.approx(1.5)
    assert states[-1].z[1][0] == 1.0  # stuck away from the solution


# -- 3 ------------------------------------------------------------------------


def _conservation_suite(seed=2024, count=100, horizon=500):
    csvs, worst_residual, worst_rise = [], 0.0, 0.0
    for s in range(count):
        rng = np.random.default_rng([seed, s])
        M = int(rng.integers(2, 21))
        n = int(rng.integers(1, 7))
        founders = rng.choice(np.arange(1, M + 1), size=int(rng.integers(1, M + 1)), replace=False)
        seq = random_volatile_sequence(M, founders.tolist(), horizon, Churn(), seed=[seed, s, 0])
        P, q = random_observations(seq.founders, n, [seed, s, 1])
        state = se_init(P, q, seq.founders)
        V_prev = V0 = lyapunov(state)
        rows = [f"0,{len(state.z)},{V0!r}"]
        for k in range(1, horizon + 1):
            state = se_step(state, seq.step(k), check=True)
            worst_residual = max(worst_residual, *state.conservation_residuals())
            V = lyapunov(state)
            worst_rise = max(worst_rise, (V - V_prev) / max(1.0, V0))
            V_prev = V
            rows.append(f"{k},{len(state.z)},{V!r}")
        csvs.append("\n".join(rows) + "\n")
    return csvs, worst_residual, worst_rise


@pytest.fixture(scope="module")
def conservation_run():
    start = time.perf_counter()
    result = _conservation_suite()
    return result, time.perf_counter() - start


def test_criterion_03_conservation(conservation_run):
    (_, worst_residual, worst_rise), elapsed = conservation_run
    assert worst_residual <= 1e-9
    assert worst_rise <= V_SLACK
    assert elapsed < 30.0


# -- 4 ------------------------------------------------------------------------


def test_criterion_04_window_contraction_and_rate_envelopes():
    seq = load_example("example4")
    K = 200
    hs = [h_of(seq, k).value for k in range(K + 1)]
    star = h_star(seq, 12).h_star
    assert star.certified
    for seed in range(20):
        P, q = random_observations(seq.founders, 3, [404, seed])
        _, trace, _ = simulate(P, q, seq, K + max(hs))
        V, lam = trace.V, trace.min_eigenvalue
        slack = _roundoff(V[0])
        evidence = upd_evidence(trace, K + max(hs), atol=1e-9)
        assert evidence.bounded_above
        for k in range(K + 1):
            h = hs[k]
            alpha = min(lam[k : k + h + 1])
            assert V[k + h] <= contraction_factor(seq.num_agents, alpha, trace.beta) * V[k] + slack
        alpha = upd_evidence(trace, K).alpha_hat
        for k in range(K + 1):
            assert V[k] <= rate_envelope(V[0], seq.num_agents, alpha, trace.beta, star.value, k) + slack


# -- 5 ------------------------------------------------------------------------


def _random_static_schedule(rng):
    M = int(rng.integers(2, 9))
    founders = sorted(rng.choice(np.arange(1, M + 1), size=int(rng.integers(1, M + 1)), replace=False).tolist())
    period = int(rng.integers(1, 7))
    K = period + int(rng.integers(0, 4))
    steps = []
    for _ in range(K):
        size = int(rng.integers(1, min(3, len(founders)) + 1))
        steps.append(ActionStep(interact=rng.choice(founders, size=size, replace=False).tolist()))
    return ActionSequence(M, founders, steps, period)


def test_criterion_05_recurring_edge_equivalence():
    rng = np.random.default_rng(5)
    verdicts = []
    for _ in range(200):
        by_h, by_graph = einfty_equivalence(_random_static_schedule(rng))
        assert by_h == by_graph
        verdicts.append(by_h)
    assert any(verdicts) and not all(verdicts)


# -- 6 ------------------------------------------------------------------------


def test_criterion_06_weighted_mean_inequalities():
    rng = np.random.default_rng(6)
    for t in range(100):
        M, n = int(rng.integers(2, 9)), int(rng.integers(1, 6))
        seq = random_volatile_sequence(M, range(1, M + 1), int(rng.integers(0, 20)), Churn(0.2, 0.2), seed=[6, t])
        P, q = random_observations(seq.founders, n, [6, t, 1])
        state, _, _ = simulate(P, q, seq, check=True, eigen=False)
        members = sorted(state.z)
        X = rng.choice(members, size=int(rng.integers(1, len(members) + 1)), replace=False).tolist()
        eta = rng.standard_normal(n) * 3
        zX = weighted_mean(state, X)

        def norm2(v, i):
            return float(v @ state.Q[i] @ v)

        to_eta = sum(norm2(state.z[i] - eta, i) for i in X)
        assert sum(norm2(zX - eta, i) for i in X) <= to_eta + 1e-10
        assert sum(norm2(state.z[i] - zX, i) for i in X) <= to_eta + 1e-10


# -- 7 ------------------------------------------------------------------------


def test_criterion_07_oracle_convergence():
    N, n, degree = 30, 4, 6
    for seed in range(10):
        graph = random_geometric(N, links_for_degree(N, degree), [77, seed])
        P, q = random_observations(graph.nodes, n, [77, seed, 1])
        truth = se_init(P, q).truth
        for mode, stream in (("PE", 2), ("GE", 3)):
            result = run_gossip(graph, P, q, mode, [77, seed, stream], 0.005, 10**6, TxLedger())
            assert result.converged, (seed, mode)
        for mode, weights in (("MDW", mdw_weights), ("MW", mw_weights)):
            assert run_consensus(graph, P, q, mode, 0.005, 10**6, TxLedger()).converged, (seed, mode)
            state = ConsensusState.from_observations(P, q, weights(graph))
            P_sum = state.P_bar.sum(axis=0)
            while np.abs(state.estimates() - truth).max() >= 1e-8 and state.rounds < 10**5:
                state = consensus_step(state)
            assert np.linalg.norm(state.estimates() - truth, axis=1).max() <= 1e-6
            assert np.allclose(state.P_bar.sum(axis=0), P_sum, rtol=1e-9, atol=1e-9)


# -- 8 ------------------------------------------------------------------------

DESK_SWEEP = dict(
    kind="sweep",
    seed=1,
    scenarios=10,
    vary="N",
    values=[50],
    base={"N": 50, "avg_degree": 20, "n": 4},
    algorithms=["PE", "GE", "MDW", "MW", "FLOODING"],
)


@pytest.fixture(scope="module")
def desk_sweep():
    start = time.perf_counter()
    rows = run_sweep(ScenarioConfig.from_json(dict(DESK_SWEEP)))
    return rows, time.perf_counter() - start


def test_criterion_08_desk_sweep(desk_sweep):
    rows, elapsed = desk_sweep
    assert elapsed < 300.0
    assert all(r.scenarios_converged == 10 for r in rows)
    mean = {r.algorithm: r.mean_transmissions for r in rows}
    assert mean["GE"] <= 0.5 * min(mean["PE"], mean["MW"])
    iterative = ("PE", "GE", "MDW", "MW")
    assert max(iterative, key=mean.get) == "MDW", {a: mean[a] for a in iterative}


# -- 9 ------------------------------------------------------------------------


def test_criterion_09_cost_model_exact():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n, N = int(rng.integers(1, 33)), int(rng.integers(2, 501))
        degree = int(rng.integers(1, N))
        sym = n * (n + 1) // 2
        assert tx_cost(TxEvent("PE", "init", n, N)) == sym * N
        assert tx_cost(TxEvent("GE", "init", n, N)) == sym * N
        assert tx_cost(TxEvent("PE", "iteration", n, N)) == 2 * n
        assert tx_cost(TxEvent("GE", "iteration", n, N, group_size=degree + 1)) == n * (degree + 1)
        for alg in ("MDW", "MW"):
            assert tx_cost(TxEvent(alg, "init", n, N)) == 0
            assert tx_cost(TxEvent(alg, "iteration", n, N)) == (sym + n) * N
        assert tx_cost(TxEvent("FLOODING", "total", n, N)) == (sym + n) * N * N
        assert type(tx_cost(TxEvent("FLOODING", "total", n, N))) is int


# -- 10 -----------------------------------------------------------------------


def test_criterion_10_determinism(conservation_run, desk_sweep):
    (first_csvs, _, _), _ = conservation_run
    again, _, _ = _conservation_suite()
    assert again == first_csvs
    rows, _ = desk_sweep
    rerun = run_sweep(ScenarioConfig.from_json(dict(DESK_SWEEP)))
    assert sweep_csv(rerun).encode() == sweep_csv(rows).encode()
