"""Markov-modulated helper capacities, peer demand and the stage loop."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import gcd

import numpy as np

from .game import ContractError, counterfactual_matrix, helper_counts
from .learning import LearningParams, make_learner

DEFAULT_LEVELS = (700.0, 800.0, 900.0)


class ErgodicityError(ContractError):
    pass


class SimulationError(RuntimeError):
    """A contract violation raised inside the stage loop, tagged with the stage."""

    def __init__(self, stage: int, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage


def slow_transition(n_levels: int, self_loop: float = 0.98) -> np.ndarray:
    """Transition matrix staying put with ``self_loop`` and spreading the rest evenly."""
    if n_levels == 1:
        return np.ones((1, 1))
    off = (1.0 - self_loop) / (n_levels - 1)
    P = np.full((n_levels, n_levels), off)
    np.fill_diagonal(P, self_loop)
    return P


@dataclass(frozen=True)
class CapacityChain:
    levels: tuple
    transition: np.ndarray = field(compare=False)
    current: int = 0

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        P = np.asarray(self.transition, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "transition", P)
        if not levels or min(levels) <= 0:
            raise ContractError(f"capacity levels must be positive, got {levels}")
        if P.shape != (len(levels), len(levels)):
            raise ContractError(f"transition matrix shape {P.shape} does not match {len(levels)} levels")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ContractError("transition matrix must be row-stochastic")
        if not 0 <= self.current < len(levels):
            raise ContractError(f"current level {self.current} out of range")

    @classmethod
    def default(cls, levels=DEFAULT_LEVELS, self_loop: float = 0.98, current: int = 0):
        return cls(tuple(levels), slow_transition(len(levels), self_loop), current)

    @property
    def capacity(self) -> float:
        return self.levels[self.current]


def chain_step(chain: CapacityChain, rng: np.random.Generator) -> CapacityChain:
    """Advance the chain one step by sampling from the current row."""
    row = np.cumsum(chain.transition[chain.current])
    nxt = min(int((row <= rng.random()).sum()), len(chain.levels) - 1)
    return replace(chain, current=nxt)


def _reachability(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    reach = (P > 0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(np.ceil(np.log2(n))) + 1)):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    return reach


def _period(P: np.ndarray) -> int:
    """Period of an irreducible chain from BFS levels: gcd of level[u] + 1 - level[v] over edges."""
    n = P.shape[0]
    level = [-1] * n
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(P[u] > 0)[0]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    g = 0
    for u in range(n):
        for v in np.nonzero(P[u] > 0)[0]:
            g = gcd(g, level[u] + 1 - level[v])
    return g


def stationary_distribution(chain_or_matrix) -> np.ndarray:
    """Unique pi with pi P = pi, sum(pi) = 1, for an irreducible aperiodic chain."""
    P = chain_or_matrix.transition if isinstance(chain_or_matrix, CapacityChain) else chain_or_matrix
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if not _reachability(P).all():
        raise ErgodicityError("chain is reducible: not every level is reachable from every other")
    period = _period(P)
    if period != 1:
        raise ErgodicityError(f"chain is periodic with period {period}")
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.abs(pi @ P - pi).max() > 1e-10:
        raise ErgodicityError("stationary solve did not converge")
    return pi


@dataclass(frozen=True)
class DemandModel:
    """Per-peer target streaming rate (a scalar or one value per peer)."""
    rate: float | tuple = 350.0

    def per_peer(self, n_peers: int) -> np.ndarray:
        r = np.broadcast_to(np.asarray(self.rate, dtype=float), (n_peers,)).copy()
        if np.any(r <= 0):
            raise ContractError("demand rate must be positive")
        return r


def server_load(rates, demand: DemandModel, mode: str = "per-peer") -> float:
    """Bandwidth the streaming server must supply on top of the helpers.

    ``per-peer`` sums each peer's shortfall ``max(0, R - r_i)``; ``aggregate`` is
    ``max(0, sum R - sum r)``.
    """
    rates = np.asarray(rates, dtype=float)
    R = demand.per_peer(rates.size)
    if mode == "per-peer":
        return float(np.maximum(R - rates, 0.0).sum())
    if mode == "aggregate":
        return float(max(0.0, R.sum() - rates.sum()))
    raise ContractError(f"unknown server-load mode {mode!r}")


@dataclass(frozen=True)
class SimulationConfig:
    n_peers: int = 10
    n_helpers: int = 4
    horizon: int = 10_000
    params: LearningParams = LearningParams()
    chains: tuple = ()  # one CapacityChain per helper; empty -> default chain for all
    demand: DemandModel = DemandModel()
    strategy: str | tuple = "r2hs"  # one name, or one per peer
    seed: int = 0
    initial_profile: tuple | None = None
    initial_levels: tuple | None = None  # None -> draw from the stationary distribution
    server_mode: str = "per-peer"

    def __post_init__(self):
        if self.n_peers < 1 or self.n_helpers < 1:
            raise ContractError("need at least one peer and one helper")
        if self.horizon < 1:
            raise ContractError("horizon must be at least 1")
        if self.chains and len(self.chains) != self.n_helpers:
            raise ContractError(f"{len(self.chains)} capacity chains given for {self.n_helpers} helpers")
        if not isinstance(self.strategy, str) and len(self.strategy) != self.n_peers:
            raise ContractError("per-peer strategy list must have one entry per peer")
        if self.initial_profile is not None:
            helper_counts(self.initial_profile, self.n_helpers)
            if len(self.initial_profile) != self.n_peers:
                raise ContractError("initial profile must assign every peer")

    def helper_chains(self) -> tuple:
        return tuple(self.chains) if self.chains else (CapacityChain.default(),) * self.n_helpers

    def strategies(self) -> tuple:
        if isinstance(self.strategy, str):
            return (self.strategy,) * self.n_peers
        return tuple(self.strategy)

    def resolved_params(self) -> LearningParams:
        cmax = max(max(c.levels) for c in self.helper_chains())
        return self.params.resolve(self.n_helpers, cmax)


def min_bandwidth_deficit(config: SimulationConfig) -> float:
    """Server bandwidth still needed when every helper runs at its lowest level."""
    demand = config.demand.per_peer(config.n_peers).sum()
    supply = sum(min(c.levels) for c in config.helper_chains())
    return float(max(0.0, demand - supply))


@dataclass
class MetricsTrace:
    """Per-stage records of one run (row ``t`` is stage ``t``).

    Three regret measures are kept per peer, each maximized over action pairs
    ``(j, k)`` and clipped at zero:

    * ``regret`` -- running-average conditional regret
      ``(1/n) sum_{tau<=n} 1[a=j] (u(k, a_-i) - u)``, the quantity whose vanishing
      means the empirical play is a correlated equilibrium;
    * ``tracking_regret`` -- the same sum with weights ``eps (1-eps)^(n-tau)``;
    * ``learner_regret`` -- the largest entry of the peer's own regret matrix
      (a bandit proxy for R2HS peers).
    """
    actions: np.ndarray        # (T, N) int
    capacities: np.ndarray     # (T, H)
    loads: np.ndarray          # (T, H) int
    rates: np.ndarray          # (T, N)
    welfare: np.ndarray        # (T,)
    server_load: np.ndarray    # (T,)
    regret: np.ndarray         # (T, N)
    tracking_regret: np.ndarray  # (T, N)
    learner_regret: np.ndarray  # (T, N)
    probs: np.ndarray          # (T, N, H) strategy each action was drawn from
    level_index: np.ndarray    # (T, H) int

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    @property
    def worst_regret(self) -> np.ndarray:
        return self.regret.max(axis=1)

    def switching_rate(self, start: int = 0) -> float:
        """Fraction of peer-stages (after ``start``) where the peer changed helper."""
        a = self.actions[max(start, 1) - 1:]
        if a.shape[0] < 2:
            return 0.0
        return float((a[1:] != a[:-1]).mean())


def run_simulation(config: SimulationConfig) -> MetricsTrace:
    """Run the stage loop: step capacities, sample actions, score, learn, record."""
    N, H, T = config.n_peers, config.n_helpers, config.horizon
    params = config.resolved_params()
    env_seq, play_seq = np.random.SeedSequence(config.seed).spawn(2)
    env_rng, play_rng = np.random.default_rng(env_seq), np.random.default_rng(play_seq)

    chains = config.helper_chains()
    levels = [np.asarray(c.levels) for c in chains]
    cdfs = [np.cumsum(c.transition, axis=1) for c in chains]
    if config.initial_levels is not None:
        state = np.asarray(config.initial_levels, dtype=int)
    else:
        state = np.array([min(int((np.cumsum(stationary_distribution(c)) <= env_rng.random()).sum()),
                              len(c.levels) - 1) for c in chains])

    kinds = config.strategies()
    groups = {}
    for i, kind in enumerate(kinds):
        groups.setdefault(kind, []).append(i)
    learners = [(np.array(idx), make_learner(kind, len(idx), H, params))
                for kind, idx in groups.items()]

    eps = params.epsilon
    tracked = np.zeros((N, H, H))
    cumulative = np.zeros((N, H, H))
    rows = np.arange(N)
    out = MetricsTrace(
        actions=np.zeros((T, N), dtype=int), capacities=np.zeros((T, H)),
        loads=np.zeros((T, H), dtype=int), rates=np.zeros((T, N)), welfare=np.zeros(T),
        server_load=np.zeros(T), regret=np.zeros((T, N)), tracking_regret=np.zeros((T, N)),
        learner_regret=np.zeros((T, N)),
        probs=np.zeros((T, N, H)), level_index=np.zeros((T, H), dtype=int))

    for t in range(T):
        try:
            u = env_rng.random(H)
            state = np.array([min(int((cdfs[h][state[h]] <= u[h]).sum()), len(levels[h]) - 1)
                              for h in range(H)])
            caps = np.array([levels[h][state[h]] for h in range(H)])

            probs = np.zeros((N, H))
            for idx, learner in learners:
                probs[idx] = learner.p
            cdf = np.cumsum(probs, axis=1)
            draw = play_rng.random(N)
            actions = np.minimum((cdf <= draw[:, None]).sum(axis=1), H - 1)
            if t == 0 and config.initial_profile is not None:
                actions = np.asarray(config.initial_profile, dtype=int)

            counts = helper_counts(actions, H)
            cf = counterfactual_matrix(actions, caps)
            r = cf[rows, actions]
            for idx, learner in learners:
                learner.update(actions[idx], r[idx], cf[idx])

            gain = cf - r[:, None]
            tracked *= 1.0 - eps
            tracked[rows, actions, :] += eps * gain
            cumulative[rows, actions, :] += gain
        except ContractError as exc:
            raise SimulationError(t, exc) from exc

        out.actions[t] = actions
        out.capacities[t] = caps
        out.level_index[t] = state
        out.loads[t] = counts
        out.rates[t] = r
        out.welfare[t] = caps[counts > 0].sum()
        out.server_load[t] = server_load(r, config.demand, config.server_mode)
        out.regret[t] = np.maximum(cumulative.max(axis=(1, 2)) / (t + 1), 0.0)
        out.tracking_regret[t] = np.maximum(tracked.max(axis=(1, 2)), 0.0)
        for idx, learner in learners:
            out.learner_regret[t, idx] = learner.Q.max(axis=(1, 2))
        out.probs[t] = probs
    return out
