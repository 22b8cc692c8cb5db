"""Myopic best response keeps swapping helpers; regret tracking settles down.

Six peers start on the same helper of two identical ones. Under synchronized
best response every peer sees the empty helper as better and they all move
together, forever.
"""
from dataclasses import replace
from pathlib import Path

from helpersel import run_simulation
from helpersel.experiments import load_scenario

scenario = load_scenario(Path(__file__).parent.parent / "scenarios" / "oscillation.toml")
burn = scenario.burn_in_stages()

br = run_simulation(scenario.config)
print("best response, first stages:")
for t in range(4):
    print("  ", br.actions[t], "loads", br.loads[t])
print(f"switching rate {br.switching_rate():.3f}")

rths = run_simulation(replace(scenario.config, strategy="rths"))
print(f"RTHS switching rate after burn-in {rths.switching_rate(burn):.4f}")
# Loads wander around the even split rather than locking in.
print("RTHS mean loads after burn-in:", rths.loads[burn:].mean(axis=0))
