"""Regret-tracking learners for helper selection.

Every update rule works on arrays with arbitrary leading batch axes, so the same
code drives one peer or a whole population: regret matrices have shape
``(..., H, H)``, strategies ``(..., H)`` and actions ``(...)``.

Three strategies are provided:

* :class:`RTHS` -- regret tracking with exact counterfactual utilities.
* :class:`R2HS` -- the bandit variant; regrets are proxies built from the
  importance-weighted matrix ``T`` so only realized utilities are needed.
* :class:`BestResponse` -- myopic best response, the unstable baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import ContractError, counterfactual_matrix


@dataclass(frozen=True)
class LearningParams:
    """Step size, exploration weight and regret normalization.

    ``mu=None`` means "resolve from the scenario" (``2 * H * C_max``).
    ``recursive_decay=False`` switches R2HS to the undecayed cumulative ``T``.
    """
    epsilon: float = 0.05
    delta: float = 0.05
    mu: float | None = None
    recursive_decay: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ContractError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ContractError(f"delta must lie in (0, 1), got {self.delta}")
        if self.mu is not None and not self.mu > 0:
            raise ContractError(f"mu must be positive, got {self.mu}")

    def resolve(self, n_helpers: int, max_capacity: float) -> "LearningParams":
        if self.mu is not None:
            return self
        return LearningParams(self.epsilon, self.delta, 2.0 * n_helpers * max_capacity,
                              self.recursive_decay)


def _row(matrix, played):
    """Select row ``played`` of each ``(H, H)`` matrix in a batch."""
    played = np.asarray(played)
    if played.ndim == 0:
        return matrix[..., played, :]
    return matrix[np.arange(played.shape[0]), played]


def _set_row(matrix, played, values):
    played = np.asarray(played)
    if played.ndim == 0:
        matrix[..., played, :] = values
    else:
        matrix[np.arange(played.shape[0]), played] = values


def update_play_probabilities(regret_row, played, delta: float, mu: float) -> np.ndarray:
    """Next mixed strategy from the regrets of the action just played.

    ``p(k) = (1 - delta) * min(Q(j, k) / mu, 1 / (m - 1)) + delta / m`` for ``k != j``
    and ``p(j)`` takes the remaining mass; ``m`` is the number of helpers.
    """
    regret_row = np.asarray(regret_row, dtype=float)
    played = np.asarray(played)
    m = regret_row.shape[-1]
    if m == 1:
        return np.ones_like(regret_row)
    p = (1.0 - delta) * np.minimum(regret_row / mu, 1.0 / (m - 1)) + delta / m
    idx = played if p.ndim == 1 else (np.arange(p.shape[0]), played)
    p[idx] = 0.0
    p[idx] = 1.0 - p.sum(axis=-1)
    return p


def rths_update_averages(avg_cf, counterfactual, played, epsilon: float) -> None:
    """Fold one stage into the recency-weighted counterfactual table, in place.

    ``avg_cf[j, k]`` is the weighted sum of ``u(k, a_-i)`` over stages where ``j`` was
    played, with weights ``epsilon * (1 - epsilon)^(n - tau)``; its diagonal is the
    weighted own realized utility.
    """
    avg_cf *= 1.0 - epsilon
    row = _row(avg_cf, played) + epsilon * np.asarray(counterfactual, dtype=float)
    _set_row(avg_cf, played, row)


def rths_update_regret(Q, avg_cf, played) -> None:
    """Recompute row ``played`` of Q in place: ``[avg_cf(j, k) - avg_cf(j, j)]^+``."""
    row = _row(avg_cf, played)
    own = np.take_along_axis(row, np.asarray(played)[..., None], axis=-1)
    new = np.maximum(row - own, 0.0)
    np.put_along_axis(new, np.asarray(played)[..., None], 0.0, axis=-1)
    _set_row(Q, played, new)


def r2hs_update_T(T, played, utility, p, epsilon: float, decay: bool = True) -> None:
    """Add one importance-weighted observation to T, in place.

    Column ``played`` receives ``p(j) * u / p(played)`` in row ``j``; with ``decay``
    every entry is first scaled by ``1 - epsilon`` so that ``epsilon * T`` is the
    recency-weighted proxy sum.
    """
    p = np.asarray(p, dtype=float)
    played = np.asarray(played)
    p_played = np.take_along_axis(p, played[..., None], axis=-1)
    if np.any(p_played <= 0):
        raise ContractError("cannot importance-weight an action played with probability 0")
    if decay:
        T *= 1.0 - epsilon
    inc = p * (np.asarray(utility, dtype=float)[..., None] / p_played)
    col = np.take_along_axis(T, played[..., None, None], axis=-1)[..., 0] + inc
    np.put_along_axis(T, played[..., None, None], col[..., None], axis=-1)


def r2hs_regret_from_T(T, played, epsilon: float) -> np.ndarray:
    """Proxy regret row ``epsilon * (T(j, k) - T(j, j))^+`` for ``j = played``."""
    row = _row(T, played)
    own = np.take_along_axis(row, np.asarray(played)[..., None], axis=-1)
    out = epsilon * np.maximum(row - own, 0.0)
    np.put_along_axis(out, np.asarray(played)[..., None], 0.0, axis=-1)
    return out


def sample_action(p, rng: np.random.Generator) -> np.ndarray | int:
    """Draw one helper index per strategy by inverse-CDF sampling.

    Works for a single strategy (returns an int) or a ``(n, H)`` batch.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p2 = np.atleast_2d(p)
    cdf = np.cumsum(p2, axis=-1)
    u = rng.random(p2.shape[0])
    idx = np.minimum((cdf <= u[:, None]).sum(axis=-1), p2.shape[-1] - 1)
    return int(idx[0]) if single else idx


def best_response_step(choice, capacities, peer: int) -> int:
    """Best unilateral reply of ``peer`` to the profile; ties go to the lowest index."""
    return int(np.argmax(counterfactual_matrix(choice, capacities)[peer]))


class Learner:
    """A population of peers running the same rule.

    ``p`` holds the mixed strategy each peer samples its next action from.
    ``update`` is called once per stage with the actions just played, their realized
    utilities and the full ``(n, H)`` counterfactual table (bandit learners ignore it).
    """
    name = "base"

    def __init__(self, n_peers: int, n_helpers: int, params: LearningParams):
        self.n_peers = n_peers
        self.n_helpers = n_helpers
        self.params = params
        self.p = np.full((n_peers, n_helpers), 1.0 / n_helpers)
        self.Q = np.zeros((n_peers, n_helpers, n_helpers))

    def update(self, played, utility, counterfactual) -> None:
        raise NotImplementedError


class RTHS(Learner):
    name = "rths"

    def __init__(self, n_peers, n_helpers, params):
        super().__init__(n_peers, n_helpers, params)
        self.avg_cf = np.zeros((n_peers, n_helpers, n_helpers))

    def update(self, played, utility, counterfactual):
        eps = self.params.epsilon
        rths_update_averages(self.avg_cf, counterfactual, played, eps)
        rths_update_regret(self.Q, self.avg_cf, played)
        self.p = update_play_probabilities(_row(self.Q, played), played,
                                           self.params.delta, self.params.mu)


class R2HS(Learner):
    name = "r2hs"

    def __init__(self, n_peers, n_helpers, params):
        super().__init__(n_peers, n_helpers, params)
        self.T = np.zeros((n_peers, n_helpers, n_helpers))

    def update(self, played, utility, counterfactual=None):
        eps = self.params.epsilon
        r2hs_update_T(self.T, played, utility, self.p, eps, decay=self.params.recursive_decay)
        _set_row(self.Q, played, r2hs_regret_from_T(self.T, played, eps))
        self.p = update_play_probabilities(_row(self.Q, played), played,
                                           self.params.delta, self.params.mu)


class BestResponse(Learner):
    """Plays a best reply to the last observed profile (point-mass strategy)."""
    name = "best-response"

    def update(self, played, utility, counterfactual):
        choice = np.argmax(counterfactual, axis=-1)
        self.p = np.zeros_like(self.p)
        self.p[np.arange(self.n_peers), choice] = 1.0


STRATEGIES = {cls.name: cls for cls in (RTHS, R2HS, BestResponse)}


def make_learner(kind: str, n_peers: int, n_helpers: int, params: LearningParams) -> Learner:
    try:
        cls = STRATEGIES[kind]
    except KeyError:
        raise ContractError(f"unknown strategy {kind!r}; choose from {sorted(STRATEGIES)}") from None
    return cls(n_peers, n_helpers, params)
