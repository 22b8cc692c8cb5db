import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from helpersel.benchmark import (BudgetExceededError, StateSpace, best_assignment,
                                 occupation_measure, peer_value, policy_value, solve_centralized,
                                 verify_lp_feasibility, lp_violations, welfare_table)
from helpersel.environment import CapacityChain, slow_transition
from helpersel.game import realized_utility
from oracles import best_over_all_policies, brute_welfare


def lp_optimum(states, n_peers):
    """Solve the occupation-measure LP directly with HiGHS."""
    U = welfare_table(states, n_peers)
    S, X = U.shape
    A_eq = np.zeros((S + 1, S * X))
    for s in range(S):
        A_eq[s, s * X:(s + 1) * X] = 1.0
    A_eq[S] = 1.0
    b_eq = np.append(states.probs, 1.0)
    res = linprog(-U.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun


def test_single_helper_single_peer():
    states = StateSpace.from_levels([700, 800, 900], 1)
    policy, r = solve_centralized(states, 1)
    assert r == pytest.approx(800.0)
    assert peer_value(policy, states, 0) == pytest.approx(800.0)


def test_fixed_state_two_by_two():
    states = StateSpace(np.array([[700.0, 900.0]]), np.array([1.0]))
    policy, r = solve_centralized(states, 2, method="enumerate")
    assert r == 1600.0
    assert sorted(policy[0]) == [0, 1]
    assert peer_value(policy, states, 1) == realized_utility(policy[0], [700.0, 900.0], 1)


def test_one_peer_two_helpers_expected_max():
    states = StateSpace.from_levels([700, 800, 900], 2)
    _, r = solve_centralized(states, 1)
    assert r == pytest.approx(7600.0 / 9.0, rel=1e-12)


def test_symmetric_policy_gives_equal_peer_values():
    states = StateSpace(np.array([[800.0, 800.0]]), np.array([1.0]))
    policy = [(0, 1)]
    assert peer_value(policy, states, 0) == peer_value(policy, states, 1)


@pytest.mark.parametrize("n_peers", range(1, 7))
def test_closed_form_matches_brute_force_per_state(n_peers):
    rng = np.random.default_rng(n_peers)
    for _ in range(5):
        h = int(rng.integers(1, 4))
        caps = rng.choice([500.0, 700.0, 800.0, 900.0], size=h)
        best = max(brute_welfare(x, caps) for x in itertools.product(range(h), repeat=n_peers))
        x = best_assignment(caps, n_peers)
        assert brute_welfare(x, caps) == pytest.approx(best, rel=1e-12)
        if n_peers >= h:
            assert best == pytest.approx(caps.sum(), rel=1e-12)
        first = next(y for y in itertools.product(range(h), repeat=n_peers)
                     if brute_welfare(y, caps) >= best - 1e-9)
        assert x == first


def _instances(limit=10**5):
    rng = np.random.default_rng(2024)
    for n_levels in (1, 2, 3):
        for h in (1, 2, 3):
            for n in range(1, 7):
                if n_levels ** h * h ** n > limit:
                    continue
                levels = tuple(sorted(rng.choice(np.arange(5, 11) * 100.0, size=n_levels, replace=False)))
                P = rng.random((n_levels, n_levels)) + 0.05
                P /= P.sum(axis=1, keepdims=True)
                yield n, StateSpace.from_chains([CapacityChain(levels, P)] * h)


def test_auto_and_enumeration_agree_exactly():
    for n, states in _instances():
        pa, ra = solve_centralized(states, n)
        pe, re = solve_centralized(states, n, method="enumerate")
        assert pa == pe
        assert ra == re


def test_decomposition_matches_lp_solver():
    for n, states in _instances(limit=2 * 10**4):
        _, r = solve_centralized(states, n)
        assert r == pytest.approx(lp_optimum(states, n), rel=1e-9)


def test_decomposition_matches_policy_enumeration_on_tiny_instances():
    P = np.array([[0.7, 0.3], [0.4, 0.6]])
    for n, h in [(1, 2), (2, 2), (1, 3)]:
        states = StateSpace.from_chains([CapacityChain((600.0, 900.0), P)] * h)
        if (h ** n) ** len(states) > 10**6:
            continue
        _, r = solve_centralized(states, n)
        assert r == pytest.approx(best_over_all_policies(states.capacities.tolist(), states.probs, n, h),
                                  rel=1e-12)


def test_full_occupancy_closed_form():
    chains = [CapacityChain((700.0, 800.0, 900.0), np.array([[0.9, 0.1, 0.0], [0.05, 0.9, 0.05], [0.0, 0.2, 0.8]])),
              CapacityChain.default(), CapacityChain((500.0, 1000.0), slow_transition(2, 0.9))]
    states = StateSpace.from_chains(chains)
    from helpersel.environment import stationary_distribution
    expected = sum(stationary_distribution(c) @ np.array(c.levels) for c in chains)
    for n in (3, 5, 10):
        assert solve_centralized(states, n)[1] == pytest.approx(expected, rel=1e-12)


def test_baseline_scale_cross_check_at_four_peers():
    states = StateSpace.from_chains([CapacityChain.default()] * 4)
    _, auto = solve_centralized(states, 4)
    _, brute = solve_centralized(states, 4, method="enumerate")
    assert auto == brute == pytest.approx(3200.0)
    assert solve_centralized(states, 10)[1] == pytest.approx(3200.0)


def test_budget_guard():
    states = StateSpace.from_chains([CapacityChain.default()] * 4)
    with pytest.raises(BudgetExceededError, match="budget"):
        solve_centralized(states, 10, method="enumerate")


def test_occupation_measure_feasibility():
    states = StateSpace.from_levels([700, 900], 2, pi=[0.25, 0.75])
    policy, r = solve_centralized(states, 3)
    rho = occupation_measure(policy, states, 3)
    assert verify_lp_feasibility(rho, states)
    assert (rho * welfare_table(states, 3)).sum() == pytest.approx(r)
    assert policy_value(policy, states) == pytest.approx(r)
    rng = np.random.default_rng(0)
    assert not verify_lp_feasibility(rng.random(rho.shape), states)
    violations = lp_violations(2 * rho, states)
    assert any("total mass" in v for v in violations)


def test_state_space_normalisation():
    states = StateSpace.from_chains([CapacityChain.default()] * 3)
    assert len(states) == 27
    assert states.probs.sum() == pytest.approx(1.0, abs=1e-9)
    emp = StateSpace.from_samples([[700.0, 800.0], [700.0, 800.0], [900.0, 800.0]])
    assert emp.probs.tolist() == pytest.approx([2 / 3, 1 / 3])
