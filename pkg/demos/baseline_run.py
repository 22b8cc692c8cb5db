"""Ten peers learn to spread themselves over four fluctuating helpers.

Run:  python demos/baseline_run.py
"""
from pathlib import Path

import numpy as np

from helpersel import jain_fairness, run_simulation
from helpersel.environment import min_bandwidth_deficit
from helpersel.experiments import load_scenario, stationary_optimum

scenario = load_scenario(Path(__file__).parent.parent / "scenarios" / "baseline.toml")
cfg = scenario.config
trace = run_simulation(cfg)
burn = scenario.burn_in_stages()

# Regret is reported relative to the average rate a peer actually receives.
mean_rate = trace.rates[burn:].mean()
print(f"worst-peer regret after {cfg.horizon} stages: {trace.worst_regret[-1]:.1f} "
      f"({trace.worst_regret[-1] / mean_rate:.1%} of the mean rate {mean_rate:.1f})")

# How close the decentralized system gets to a server that sees every capacity.
r_star = stationary_optimum(scenario)
print(f"time-averaged welfare {trace.welfare[burn:].mean():.1f} vs optimum {r_star:.1f}")

# Load balance over helpers and fairness over peers.
print("mean helper loads:", np.round(trace.loads[burn:].mean(axis=0), 2))
print(f"Jain (helpers) {jain_fairness(trace.loads[burn:].mean(axis=0)):.4f}, "
      f"Jain (peers) {jain_fairness(trace.rates[burn:].mean(axis=0)):.4f}")

print(f"server load {trace.server_load[burn:].mean():.1f} "
      f"(bandwidth deficit with every helper at its lowest level: {min_bandwidth_deficit(cfg):.0f})")
