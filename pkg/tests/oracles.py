"""Independent reference computations used only by the tests.

Nothing here imports the code paths it is used to check.
"""
import itertools
import math


def brute_welfare(choice, caps):
    counts = [0] * len(caps)
    for a in choice:
        counts[a] += 1
    return math.fsum(caps[a] / counts[a] for a in choice)


def brute_is_nash(choice, caps):
    counts = [0] * len(caps)
    for a in choice:
        counts[a] += 1
    for a in choice:
        own = caps[a] / counts[a]
        for b in range(len(caps)):
            if b != a and caps[b] / (counts[b] + 1) > own:
                return False
    return True


def direct_proxy_regret(actions, probs, utils, epsilon, n_helpers):
    """Term-by-term recency-weighted proxy regret after the last stage.

    Q(j, k) = [sum_{tau: a=k} w_tau p_tau(j)/p_tau(k) u_tau - sum_{tau: a=j} w_tau u_tau]^+
    with w_tau = epsilon (1 - epsilon)^(n - tau).
    """
    n = len(actions) - 1
    Q = [[0.0] * n_helpers for _ in range(n_helpers)]
    for j in range(n_helpers):
        own = math.fsum(epsilon * (1 - epsilon) ** (n - t) * utils[t]
                        for t in range(n + 1) if actions[t] == j)
        for k in range(n_helpers):
            if k == j:
                continue
            proxy = math.fsum(epsilon * (1 - epsilon) ** (n - t) * probs[t][j] / probs[t][k] * utils[t]
                              for t in range(n + 1) if actions[t] == k)
            Q[j][k] = max(0.0, proxy - own)
    return Q


def best_over_all_policies(state_caps, state_probs, n_peers, n_helpers):
    """Max stationary welfare over every deterministic map state -> assignment."""
    assignments = list(itertools.product(range(n_helpers), repeat=n_peers))
    best = -math.inf
    for policy in itertools.product(assignments, repeat=len(state_caps)):
        v = math.fsum(p * brute_welfare(x, c) for x, c, p in zip(policy, state_caps, state_probs))
        best = max(best, v)
    return best
