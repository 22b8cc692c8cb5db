"""Centralized cooperative optimum over stationary helper states.

The server sees the joint helper state ``y`` and picks an assignment ``x``. The
occupation-measure LP

    max  sum_{y,x} u(y, x) rho(y, x)
    s.t. sum_x rho(y, x) = pi(y),  sum rho = 1,  rho >= 0

couples variables only within each ``y`` block, so the optimum puts all of
``pi(y)`` on a welfare-maximizing assignment of that state. Welfare of an
assignment is the total capacity of helpers that serve at least one peer, so the
per-state maximum is the sum of the ``min(N, H)`` largest capacities.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .game import ContractError, all_profiles, rates, social_welfare
from .environment import CapacityChain, stationary_distribution

ENUMERATION_BUDGET = 10**7


class BudgetExceededError(ContractError):
    pass


@dataclass(frozen=True)
class StateSpace:
    """Joint helper states with their probabilities.

    ``capacities[s]`` is the capacity vector of state ``s`` and ``probs[s]`` its
    probability. States built by :meth:`from_chains` follow the product of the
    per-helper stationary distributions in lexicographic level order.
    """
    capacities: np.ndarray  # (S, H)
    probs: np.ndarray       # (S,)

    def __post_init__(self):
        caps = np.atleast_2d(np.asarray(self.capacities, dtype=float))
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (caps.shape[0],):
            raise ContractError("one probability per joint state is required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ContractError("state probabilities must be nonnegative and sum to 1")

    @property
    def n_helpers(self) -> int:
        return self.capacities.shape[1]

    def __len__(self) -> int:
        return self.capacities.shape[0]

    @classmethod
    def from_chains(cls, chains) -> "StateSpace":
        pis = [stationary_distribution(c) for c in chains]
        caps, probs = [], []
        for combo in itertools.product(*(range(len(c.levels)) for c in chains)):
            caps.append([c.levels[k] for c, k in zip(chains, combo)])
            probs.append(np.prod([pi[k] for pi, k in zip(pis, combo)]))
        return cls(np.array(caps), np.array(probs))

    @classmethod
    def from_levels(cls, levels, n_helpers: int, pi=None) -> "StateSpace":
        """Identical independent helpers sharing ``levels`` with marginal ``pi`` (uniform by default)."""
        levels = tuple(float(v) for v in levels)
        if pi is None:
            P = np.full((len(levels), len(levels)), 1.0 / len(levels))
        else:
            P = np.tile(np.asarray(pi, dtype=float), (len(levels), 1))
        return cls.from_chains([CapacityChain(levels, P)] * n_helpers)

    @classmethod
    def from_samples(cls, capacity_trace) -> "StateSpace":
        """Empirical joint-state distribution of an observed capacity path."""
        rows, counts = np.unique(np.asarray(capacity_trace, dtype=float), axis=0, return_counts=True)
        return cls(rows, counts / counts.sum())


def best_assignment(capacities, n_peers: int) -> tuple[int, ...]:
    """Lexicographically smallest welfare-maximizing assignment for one state."""
    caps = np.asarray(capacities, dtype=float)
    H = caps.size
    target = np.sort(caps)[::-1][:min(n_peers, H)].sum()
    choice: list[int] = []
    used: set[int] = set()
    for i in range(n_peers):
        remaining = n_peers - i - 1
        for h in range(H):
            u = used | {h}
            rest = np.sort([caps[k] for k in range(H) if k not in u])[::-1]
            best = sum(caps[k] for k in u) + rest[:remaining].sum()
            if best >= target - 1e-9 * abs(target):
                choice.append(h)
                used = u
                break
    return tuple(choice)


def _enumerate_best(capacities, n_peers: int) -> tuple[tuple[int, ...], float]:
    best_x, best_u = None, -np.inf
    for x in all_profiles(n_peers, len(capacities)):
        u = social_welfare(x, capacities)
        if u > best_u:
            best_x, best_u = x, u
    return best_x, best_u


def solve_centralized(states: StateSpace, n_peers: int, method: str = "auto"):
    """Optimal centralized policy and its stationary welfare R*.

    Returns ``(policy, r_star)`` where ``policy[s]`` is the assignment used in joint
    state ``s``. ``method="enumerate"`` scans every assignment of every state
    (guarded by :data:`ENUMERATION_BUDGET`); ``"auto"`` uses the top-capacity
    closed form, which picks the same lexicographically smallest maximizer.
    """
    if method == "enumerate":
        cost = len(states) * states.n_helpers ** n_peers
        if cost > ENUMERATION_BUDGET:
            raise BudgetExceededError(
                f"{len(states)} states x {states.n_helpers}^{n_peers} assignments = {cost} evaluations "
                f"exceeds the budget of {ENUMERATION_BUDGET}; use fewer peers/helpers or method='auto'")
        solved = [_enumerate_best(c, n_peers) for c in states.capacities]
        policy = [x for x, _ in solved]
        values = np.array([u for _, u in solved])
    elif method == "auto":
        policy = [best_assignment(c, n_peers) for c in states.capacities]
        values = np.array([social_welfare(x, c) for x, c in zip(policy, states.capacities)])
    else:
        raise ContractError(f"unknown method {method!r}")
    return policy, float(states.probs @ values)


def peer_value(policy, states: StateSpace, peer: int) -> float:
    """Stationary expected rate of ``peer`` under a deterministic policy."""
    vals = np.array([rates(x, c)[peer] for x, c in zip(policy, states.capacities)])
    return float(states.probs @ vals)


def policy_value(policy, states: StateSpace) -> float:
    return float(states.probs @ np.array([social_welfare(x, c) for x, c in zip(policy, states.capacities)]))


def assignment_index(x, n_helpers: int) -> int:
    """Position of ``x`` in lexicographic enumeration order."""
    idx = 0
    for a in x:
        idx = idx * n_helpers + int(a)
    return idx


def occupation_measure(policy, states: StateSpace, n_peers: int) -> np.ndarray:
    """Dense ``(S, H**N)`` occupation measure rho(y, x) = pi(y) 1[x = policy(y)]."""
    H = states.n_helpers
    rho = np.zeros((len(states), H ** n_peers))
    for s, x in enumerate(policy):
        rho[s, assignment_index(x, H)] = states.probs[s]
    return rho


def welfare_table(states: StateSpace, n_peers: int) -> np.ndarray:
    """``(S, H**N)`` table of u(y, x) in lexicographic assignment order."""
    profiles = list(all_profiles(n_peers, states.n_helpers))
    return np.array([[social_welfare(x, c) for x in profiles] for c in states.capacities])


def lp_violations(measure, states: StateSpace, tol: float = 1e-9) -> list[str]:
    """Describe every broken occupation-measure constraint (empty when feasible)."""
    rho = np.asarray(measure, dtype=float)
    out = []
    if rho.shape[0] != len(states):
        return [f"measure has {rho.shape[0]} state rows, expected {len(states)}"]
    if rho.min() < -tol:
        out.append(f"negative mass {rho.min():.3g}")
    marg = rho.sum(axis=1)
    for s in np.nonzero(np.abs(marg - states.probs) > tol)[0]:
        out.append(f"state {int(s)}: sum_x rho = {marg[s]:.6g} != pi = {states.probs[s]:.6g}")
    if abs(rho.sum() - 1.0) > tol:
        out.append(f"total mass {rho.sum():.6g} != 1")
    return out


def verify_lp_feasibility(measure, states: StateSpace, tol: float = 1e-9) -> bool:
    return not lp_violations(measure, states, tol)
