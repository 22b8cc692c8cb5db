"""The cooperative benchmark R* and three ways to get it."""
import numpy as np

from helpersel.benchmark import (StateSpace, occupation_measure, solve_centralized,
                                 verify_lp_feasibility, welfare_table)
from helpersel.environment import CapacityChain

chains = [CapacityChain.default()] * 3
states = StateSpace.from_chains(chains)
print(f"{len(states)} joint helper states")

for n in (2, 3, 5):
    policy, auto = solve_centralized(states, n)
    _, brute = solve_centralized(states, n, method="enumerate")
    rho = occupation_measure(policy, states, n)
    lp_value = float((rho * welfare_table(states, n)).sum())
    print(f"N={n}: closed form {auto:.3f}, enumeration {brute:.3f}, "
          f"occupation measure {lp_value:.3f} (feasible: {verify_lp_feasibility(rho, states)})")

# With fewer peers than helpers the server keeps the fastest helpers busy.
caps = np.array([900.0, 700.0, 800.0])
policy, _ = solve_centralized(StateSpace(caps[None, :], np.array([1.0])), 2)
print("2 peers, capacities", caps, "->", policy[0])
