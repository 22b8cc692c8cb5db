"""Helper-selection game: C/sigma utilities, welfare, fairness and CE checks.

A joint action (assignment profile) is an integer array ``choice`` of length N
where ``choice[i]`` is the helper peer ``i`` is connected to. Capacities are a
length-H array of positive rates.
"""
from __future__ import annotations

import itertools
import warnings
from collections import Counter
from typing import Iterable, NamedTuple

import numpy as np


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


def helper_counts(choice, n_helpers: int) -> np.ndarray:
    """Number of peers connected to each helper (sigma)."""
    choice = np.asarray(choice, dtype=int)
    if choice.size and (choice.min() < 0 or choice.max() >= n_helpers):
        raise ContractError(f"assignment {choice.tolist()} references a helper outside [0, {n_helpers})")
    return np.bincount(choice, minlength=n_helpers)


def _check_capacities(capacities) -> np.ndarray:
    capacities = np.asarray(capacities, dtype=float)
    if capacities.ndim != 1 or capacities.size == 0:
        raise ContractError("capacities must be a non-empty 1-d vector")
    if np.any(capacities <= 0):
        raise ContractError(f"capacities must be positive, got {capacities.tolist()}")
    return capacities


def realized_utility(choice, capacities, peer: int) -> float:
    """Streaming rate C_h / sigma_h the peer gets from its chosen helper h."""
    capacities = _check_capacities(capacities)
    choice = np.asarray(choice, dtype=int)
    if not 0 <= peer < choice.size:
        raise ContractError(f"peer {peer} is not part of a profile of {choice.size} peers")
    counts = helper_counts(choice, capacities.size)
    h = choice[peer]
    return capacities[h] / counts[h]


def counterfactual_utility(choice, capacities, peer: int, alt: int) -> float:
    """Rate the peer would get by moving alone to helper ``alt``."""
    capacities = _check_capacities(capacities)
    if not 0 <= alt < capacities.size:
        raise ContractError(f"helper {alt} does not exist (H={capacities.size})")
    choice = np.asarray(choice, dtype=int)
    if not 0 <= peer < choice.size:
        raise ContractError(f"peer {peer} is not part of a profile of {choice.size} peers")
    if choice[peer] == alt:
        return realized_utility(choice, capacities, peer)
    counts = helper_counts(choice, capacities.size)
    return capacities[alt] / (counts[alt] + 1)


def rates(choice, capacities) -> np.ndarray:
    """Per-peer realized utilities for a whole profile."""
    capacities = _check_capacities(capacities)
    choice = np.asarray(choice, dtype=int)
    counts = helper_counts(choice, capacities.size)
    return capacities[choice] / counts[choice]


def counterfactual_matrix(choice, capacities) -> np.ndarray:
    """(N, H) matrix of unilateral-deviation utilities.

    Entry ``[i, k]`` is :func:`counterfactual_utility` of peer ``i`` for helper ``k``;
    the own-helper column holds the realized utility.
    """
    capacities = _check_capacities(capacities)
    choice = np.asarray(choice, dtype=int)
    counts = helper_counts(choice, capacities.size)
    cf = np.broadcast_to(capacities / (counts + 1), (choice.size, capacities.size)).copy()
    idx = np.arange(choice.size)
    cf[idx, choice] = capacities[choice] / counts[choice]
    return cf


def social_welfare(choice, capacities) -> float:
    """Sum of per-peer rates.

    Computed as the total capacity of helpers with at least one peer, which is the
    same quantity without the rounding of summing C/sigma terms.
    """
    capacities = _check_capacities(capacities)
    counts = helper_counts(choice, capacities.size)
    return float(capacities[counts > 0].sum())


def jain_fairness(values) -> float:
    """Jain's index (sum r)^2 / (N * sum r^2), in [1/N, 1]."""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.any(values > 0):
        raise ContractError("Jain index is undefined when no value is positive")
    return float(values.sum() ** 2 / (values.size * np.square(values).sum()))


class EmpiricalJointDistribution:
    """Frequency table over joint action profiles."""

    def __init__(self, n_peers: int, n_helpers: int):
        self.n_peers = n_peers
        self.n_helpers = n_helpers
        self.counts: Counter[tuple[int, ...]] = Counter()

    @classmethod
    def from_profiles(cls, profiles, n_helpers: int) -> "EmpiricalJointDistribution":
        profiles = np.asarray(profiles, dtype=int)
        dist = cls(profiles.shape[1], n_helpers)
        for row in profiles:
            dist.add(row)
        return dist

    @classmethod
    def from_weights(cls, weights: dict, n_peers: int, n_helpers: int) -> "EmpiricalJointDistribution":
        """Build from integer counts keyed by profile tuple."""
        dist = cls(n_peers, n_helpers)
        for profile, count in weights.items():
            dist.add(profile, count)
        return dist

    def add(self, profile: Iterable[int], count: int = 1) -> None:
        key = tuple(int(a) for a in profile)
        if len(key) != self.n_peers:
            raise ContractError(f"profile {key} does not have {self.n_peers} peers")
        if any(not 0 <= a < self.n_helpers for a in key):
            raise ContractError(f"profile {key} references a helper outside [0, {self.n_helpers})")
        self.counts[key] += count

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def items(self):
        """Yield (profile, probability) pairs in sorted profile order."""
        total = self.total
        for key in sorted(self.counts):
            yield key, self.counts[key] / total

    def __len__(self) -> int:
        return len(self.counts)


class Violation(NamedTuple):
    peer: int
    action: int
    alternative: int
    gain: float


def deviation_gains(dist: EmpiricalJointDistribution, expected_capacities) -> np.ndarray:
    """(N, H, H) array of expected gains from swapping ``action`` for ``alternative``.

    ``gains[i, a, b] = sum_{x: x_i = a} P(x) * (u_i(b, x_-i) - u_i(x))``.
    """
    capacities = _check_capacities(expected_capacities)
    if capacities.size != dist.n_helpers:
        raise ContractError("capacity vector length does not match the number of helpers")
    n, h = dist.n_peers, dist.n_helpers
    gains = np.zeros((n, h, h))
    idx = np.arange(n)
    for profile, weight in dist.items():
        choice = np.array(profile)
        cf = counterfactual_matrix(choice, capacities)
        own = cf[idx, choice]
        gains[idx, choice, :] += weight * (cf - own[:, None])
    return gains


def mean_utility(dist: EmpiricalJointDistribution, expected_capacities) -> float:
    """Mean per-peer utility under the distribution."""
    capacities = _check_capacities(expected_capacities)
    return sum(w * social_welfare(p, capacities) for p, w in dist.items()) / dist.n_peers


def check_correlated_equilibrium(dist: EmpiricalJointDistribution, expected_capacities,
                                 tol: float | None = None, max_profiles: int = 4096) -> list[Violation]:
    """List every (peer, action, alternative) whose expected deviation gain exceeds ``tol``.

    An empty list certifies ``dist`` as an approximate correlated equilibrium of the
    game with capacities fixed at ``expected_capacities`` (u is linear in C for a
    fixed profile, so this equals averaging over capacity states).
    ``tol`` defaults to 1% of the mean per-peer utility.
    """
    if dist.total == 0:
        raise ContractError("cannot certify an empty distribution")
    if dist.n_helpers ** dist.n_peers > max_profiles:
        warnings.warn(f"{dist.n_helpers}^{dist.n_peers} joint profiles exceeds the intended "
                      f"enumeration budget of {max_profiles}", RuntimeWarning, stacklevel=2)
    if tol is None:
        tol = 0.01 * mean_utility(dist, expected_capacities)
    gains = deviation_gains(dist, expected_capacities)
    out = []
    for i, a, b in zip(*np.nonzero(gains > tol)):
        if a != b:
            out.append(Violation(int(i), int(a), int(b), float(gains[i, a, b])))
    return out


def is_pure_nash(choice, capacities) -> bool:
    """True when no peer strictly gains by a unilateral move."""
    choice = np.asarray(choice, dtype=int)
    cf = counterfactual_matrix(choice, capacities)
    own = cf[np.arange(choice.size), choice]
    return bool(np.all(cf <= own[:, None]))


def all_profiles(n_peers: int, n_helpers: int):
    """Every joint profile in lexicographic order."""
    return itertools.product(range(n_helpers), repeat=n_peers)
